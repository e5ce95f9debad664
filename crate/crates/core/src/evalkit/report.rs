use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, bootstrap_ci, class_metrics, Interval};
use super::records::PredictionRecord;
use crate::error::{invalid, Result, SkidError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub name: String,
    pub positives: usize,
    pub accuracy: Option<Interval>,
    pub sensitivity: Option<Interval>,
    pub specificity: Option<Interval>,
    pub auc: Option<Interval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub source: String,
    pub n_clips: usize,
    pub n_boot: usize,
    pub ci: [f64; 2],
    pub seed: u64,
    pub classes: Vec<ClassReport>,
}

#[derive(Debug, Clone, Copy)]
enum Which {
    Accuracy,
    Sensitivity,
    Specificity,
}

/// Point estimates and percentile-bootstrap intervals per class from
/// `scores[i][j]` and `labels[i][j]`.
pub fn metrics_report(
    source: &str,
    names: &[&str],
    scores: &[Vec<f64>],
    labels: &[Vec<u8>],
    n_boot: usize,
    ci: (f64, f64),
    seed: u64,
) -> Result<MetricsReport> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(invalid("need equally many score and label rows"));
    }
    let mut classes = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let s: Vec<f64> = scores.iter().map(|r| r[j]).collect();
        let y: Vec<u8> = labels.iter().map(|r| r[j]).collect();
        let base = class_metrics(&s, &y, j)?;
        let mut notes = base.undefined.clone();
        let threshold = |which: Which| -> Option<Interval> {
            let m = |idx: &[usize]| -> Result<f64> {
                let ss: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
                let yy: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
                let c = class_metrics(&ss, &yy, j)?;
                let v = match which {
                    Which::Accuracy => Some(c.accuracy),
                    Which::Sensitivity => c.sensitivity,
                    Which::Specificity => c.specificity,
                };
                v.ok_or(SkidError::UndefinedMetric {
                    class: j,
                    reason: "empty denominator".into(),
                })
            };
            bootstrap_ci(s.len(), m, n_boot, ci.0, ci.1, seed).ok()
        };
        let accuracy = threshold(Which::Accuracy);
        let sensitivity = base.sensitivity.and_then(|_| threshold(Which::Sensitivity));
        let specificity = base.specificity.and_then(|_| threshold(Which::Specificity));
        let auc_ci = match base.auc {
            Some(_) => {
                let m = |idx: &[usize]| {
                    let ss: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
                    let yy: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
                    auc(&ss, &yy, j)
                };
                match bootstrap_ci(s.len(), m, n_boot, ci.0, ci.1, seed) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        notes.push(format!("AUC interval: {e}"));
                        None
                    }
                }
            }
            None => None,
        };
        classes.push(ClassReport {
            name: name.to_string(),
            positives: y.iter().filter(|&&v| v > 0).count(),
            accuracy,
            sensitivity,
            specificity,
            auc: auc_ci,
            notes,
        });
    }
    Ok(MetricsReport {
        source: source.to_string(),
        n_clips: scores.len(),
        n_boot,
        ci: [ci.0, ci.1],
        seed,
        classes,
    })
}

/// Report over a single classifier's records.
pub fn records_report(source: &str, records: &[PredictionRecord], n_boot: usize, seed: u64) -> Result<MetricsReport> {
    let scores: Vec<Vec<f64>> = records.iter().map(|r| r.probs.clone()).collect();
    let labels: Vec<Vec<u8>> = records.iter().map(|r| r.labels.clone()).collect();
    metrics_report(source, &crate::LABEL_NAMES, &scores, &labels, n_boot, (0.05, 0.95), seed)
}

impl MetricsReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        crate::io_util::write_atomic(path.as_ref(), &bytes)
    }
}

#[derive(Serialize)]
struct SweepRow<'a> {
    setting: &'a str,
    class: &'a str,
    positives: usize,
    auc: Option<f64>,
    auc_lo: Option<f64>,
    auc_hi: Option<f64>,
    accuracy: Option<f64>,
    sensitivity: Option<f64>,
    specificity: Option<f64>,
}

/// One row per (setting, class), for plotting a metric against an ablation
/// knob: `setting,class,positives,auc,auc_lo,auc_hi,accuracy,sensitivity,specificity`.
pub fn write_sweep_csv(path: impl AsRef<Path>, reports: &[(String, MetricsReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (setting, r) in reports {
        for c in &r.classes {
            w.serialize(SweepRow {
                setting,
                class: &c.name,
                positives: c.positives,
                auc: c.auc.map(|i| i.point),
                auc_lo: c.auc.map(|i| i.lo),
                auc_hi: c.auc.map(|i| i.hi),
                accuracy: c.accuracy.map(|i| i.point),
                sensitivity: c.sensitivity.map(|i| i.point),
                specificity: c.specificity.map(|i| i.point),
            })?;
        }
    }
    let bytes = w.into_inner().map_err(|e| invalid(format!("csv flush: {e}")))?;
    crate::io_util::write_atomic(path.as_ref(), &bytes)
}
