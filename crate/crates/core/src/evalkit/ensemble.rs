use serde::{Deserialize, Serialize};

use super::records::PredictionRecord;
use crate::error::{invalid, Result};
use crate::plane::Plane;

/// Per-class voting weights over the plane classifiers, each row summing
/// to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub planes: Vec<Plane>,
    /// `w[class][classifier]`
    pub w: Vec<Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EnsembleWeights {
    pub fn uniform(planes: &[Plane], n_classes: usize) -> Self {
        let t = planes.len();
        EnsembleWeights {
            planes: planes.to_vec(),
            w: vec![vec![1.0 / t as f64; t]; n_classes],
            warnings: Vec::new(),
        }
    }

    /// Normalizes non-negative raw weights per class. A class whose raw
    /// weights are all zero falls back to equal weights.
    pub fn from_raw(planes: &[Plane], raw: Vec<Vec<f64>>) -> Result<Self> {
        let t = planes.len();
        if t == 0 {
            return Err(invalid("no classifiers"));
        }
        let mut warnings = Vec::new();
        let mut w = Vec::with_capacity(raw.len());
        for (j, row) in raw.into_iter().enumerate() {
            if row.len() != t {
                return Err(invalid(format!("class {j}: {} weights for {t} classifiers", row.len())));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid(format!("class {j}: raw weights must be finite and non-negative")));
            }
            let sum: f64 = row.iter().sum();
            if sum == 0.0 {
                let msg = format!("class {j}: every classifier has zero weight, using equal weights");
                log::warn!("{msg}");
                warnings.push(msg);
                w.push(vec![1.0 / t as f64; t]);
            } else {
                w.push(row.into_iter().map(|v| v / sum).collect());
            }
        }
        Ok(EnsembleWeights { planes: planes.to_vec(), w, warnings })
    }

    pub fn n_classes(&self) -> usize {
        self.w.len()
    }
}

/// Raw log-odds weight `ln(p / (1 - p))`.
pub fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Weights from per-class validation accuracies `acc[class][classifier]`.
/// Non-positive log-odds are clamped to zero with a warning.
pub fn compute_weights(planes: &[Plane], acc: &[Vec<f64>]) -> Result<EnsembleWeights> {
    let mut warnings = Vec::new();
    let mut raw = Vec::with_capacity(acc.len());
    for (j, row) in acc.iter().enumerate() {
        let mut r = Vec::with_capacity(row.len());
        for (i, &p) in row.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid(format!(
                    "accuracy {p} for class {j}, classifier {i} must lie strictly inside (0, 1)"
                )));
            }
            let v = log_odds(p);
            if v <= 0.0 {
                let msg = format!("class {j}, classifier {i}: accuracy {p} gives weight {v:.4}, clamped to 0");
                log::warn!("{msg}");
                warnings.push(msg);
            }
            r.push(v.max(0.0));
        }
        raw.push(r);
    }
    let mut w = EnsembleWeights::from_raw(planes, raw)?;
    warnings.append(&mut w.warnings);
    w.warnings = warnings;
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutput {
    pub scores: Vec<f64>,
    pub bits: Vec<u8>,
}

/// `score_j = Σ_i w[j][i]·h_i^j`, decision `score_j >= 0.5`. `records` holds
/// one record per plane of a single clip.
pub fn ensemble_predict(records: &[&PredictionRecord], w: &EnsembleWeights) -> Result<EnsembleOutput> {
    let mut per_plane = Vec::with_capacity(w.planes.len());
    for &plane in &w.planes {
        let r = records
            .iter()
            .find(|r| r.plane == plane)
            .ok_or_else(|| invalid(format!("missing {plane} prediction")))?;
        if r.probs.len() != w.n_classes() {
            return Err(invalid(format!(
                "{plane} record has {} probabilities, weights cover {} classes",
                r.probs.len(),
                w.n_classes()
            )));
        }
        per_plane.push(r);
    }
    let mut scores = Vec::with_capacity(w.n_classes());
    for (j, row) in w.w.iter().enumerate() {
        let mut s = 0.0;
        for (wi, r) in row.iter().zip(&per_plane) {
            s += wi * r.probs[j];
        }
        scores.push(s);
    }
    let bits = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
    Ok(EnsembleOutput { scores, bits })
}

/// Per-class accuracy at 0.5 of one classifier's records: the `p` that feeds
/// [`compute_weights`].
pub fn class_accuracies(records: &[PredictionRecord]) -> Vec<f64> {
    let l = records.first().map(|r| r.probs.len()).unwrap_or(0);
    (0..l)
        .map(|j| {
            let hit = records
                .iter()
                .filter(|r| u8::from(r.probs[j] >= 0.5) == r.labels[j])
                .count();
            hit as f64 / records.len() as f64
        })
        .collect()
}
