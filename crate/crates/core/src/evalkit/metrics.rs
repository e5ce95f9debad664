use serde::{Deserialize, Serialize};
use skid_autograd::exec;

use crate::error::{invalid, Result, SkidError};
use crate::rng::stream_rng;

/// Mann-Whitney AUC with midranks for ties. `class` only labels the error.
pub fn auc(scores: &[f64], labels: &[u8], class: usize) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(invalid("scores and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|&&l| l > 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SkidError::UndefinedMetric {
            class,
            reason: format!("AUC needs both classes ({n_pos} positive, {n_neg} negative)"),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("NaN score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut k = i;
        while k + 1 < order.len() && scores[order[k + 1]] == scores[order[i]] {
            k += 1;
        }
        // ranks i+1 ..= k+1 share their mean
        let mid = (i + k + 2) as f64 / 2.0;
        for &o in &order[i..=k] {
            if labels[o] > 0 {
                rank_sum_pos += mid;
            }
        }
        i = k + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

/// Threshold-0.5 accuracy, sensitivity and specificity plus AUC for one
/// class. Undefined entries are `None` with the reason listed.
pub fn class_metrics(scores: &[f64], labels: &[u8], class: usize) -> Result<ClassMetrics> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(invalid("need equally long, non-empty scores and labels"));
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= 0.5, l > 0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
    }
    let mut undefined = Vec::new();
    let ratio = |num: usize, den: usize, what: &str, undefined: &mut Vec<String>| {
        if den == 0 {
            undefined.push(format!("{what}: no samples in denominator"));
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let sensitivity = ratio(tp, tp + fneg, "sensitivity", &mut undefined);
    let specificity = ratio(tn, tn + fp, "specificity", &mut undefined);
    let auc = match auc(scores, labels, class) {
        Ok(a) => Some(a),
        Err(SkidError::UndefinedMetric { reason, .. }) => {
            undefined.push(reason);
            None
        }
        Err(e) => return Err(e),
    };
    Ok(ClassMetrics {
        accuracy: (tp + tn) as f64 / scores.len() as f64,
        sensitivity,
        specificity,
        auc,
        undefined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Percentile of sorted values with linear interpolation between ranks.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (a, frac) = (pos.floor() as usize, pos - pos.floor());
    if a + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[a] + frac * (sorted[a + 1] - sorted[a])
    }
}

/// Percentile bootstrap over `n` items. `metric` receives resampled indices
/// and may return `UndefinedMetric`, in which case the resample is redrawn
/// (up to `10·n_boot` draws in total). Draw `d` uses RNG stream `d`, and the
/// first `n_boot` defined draws in index order are kept, so the result does
/// not depend on threading.
pub fn bootstrap_ci<F>(n: usize, metric: F, n_boot: usize, lo: f64, hi: f64, seed: u64) -> Result<Interval>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    use rand::Rng;
    if n == 0 || n_boot == 0 {
        return Err(invalid("bootstrap needs records and at least one resample"));
    }
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(invalid(format!("bad percentile range [{lo}, {hi}]")));
    }
    let all: Vec<usize> = (0..n).collect();
    let point = metric(&all)?;
    let mut vals = Vec::with_capacity(n_boot);
    let max_draws = 10 * n_boot;
    let mut draws = 0;
    while vals.len() < n_boot {
        if draws == max_draws {
            return Err(SkidError::UndefinedMetric {
                class: 0,
                reason: format!("metric undefined on too many resamples ({max_draws} draws for {} values)", vals.len()),
            });
        }
        let round = (n_boot - vals.len()).min(max_draws - draws);
        let first = draws;
        let results = exec::map_indexed(round, |k| {
            let mut rng = stream_rng(seed, (first + k) as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            metric(&idx)
        });
        draws += round;
        for r in results {
            match r {
                Ok(v) => vals.push(v),
                Err(SkidError::UndefinedMetric { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    vals.sort_by(f64::total_cmp);
    Ok(Interval {
        point,
        lo: percentile(&vals, lo),
        hi: percentile(&vals, hi),
    })
}
