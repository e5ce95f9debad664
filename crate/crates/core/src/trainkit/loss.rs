use crate::error::{invalid, Result};

pub const BCE_EPS: f64 = 1e-7;

/// `Σ_j [w_j·(−t_j·ln p_j) − (1−t_j)·ln(1−p_j)] / L` with `p` clamped to
/// `[ε, 1−ε]`.
pub fn weighted_bce(pred: &[f64], target: &[u8], pos_weights: &[f64]) -> Result<f64> {
    let l = pred.len();
    if l == 0 || target.len() != l || pos_weights.len() != l {
        return Err(invalid("pred, target and weights must have the same non-zero length"));
    }
    let mut s = 0.0;
    for j in 0..l {
        let p = pred[j].clamp(BCE_EPS, 1.0 - BCE_EPS);
        let t = target[j] as f64;
        s += pos_weights[j] * (-t * p.ln()) - (1.0 - t) * (1.0 - p).ln();
    }
    Ok(s / l as f64)
}

/// Negatives over positives per label; labels without positives get 1.
pub fn default_pos_weights(labels: &[&[u8]], n_labels: usize) -> Vec<f64> {
    (0..n_labels)
        .map(|j| {
            let pos = labels.iter().filter(|l| l[j] > 0).count();
            let neg = labels.len() - pos;
            if pos == 0 || neg == 0 {
                log::warn!("label {j} has {pos} positives and {neg} negatives; using weight 1");
                1.0
            } else {
                neg as f64 / pos as f64
            }
        })
        .collect()
}
