//! Evaluation: centred frame sampling with repeated predictions, log-odds
//! weighted voting across planes, and metrics with bootstrap intervals.

mod ensemble;
mod metrics;
mod predictors;
mod records;
mod report;
mod sampling;

pub use ensemble::{class_accuracies, compute_weights, ensemble_predict, log_odds, EnsembleOutput, EnsembleWeights};
pub use metrics::{auc, bootstrap_ci, class_metrics, percentile, ClassMetrics, Interval};
pub use predictors::{FeaturePredictor, VolumePredictor};
pub use records::{read_records, write_records, PredictionRecord};
pub use report::{metrics_report, records_report, write_sweep_csv, ClassReport, MetricsReport};
pub use sampling::{predict_clip, raw_eval_draw, sample_eval_frames, ClipPredictor, EVAL_FRAMES, EVAL_REPEATS};

/// Clamps a validation accuracy measured on `n` clips into the open
/// interval by half a clip on each side, so log-odds stay finite.
pub fn clamp_accuracy(p: f64, n: usize) -> f64 {
    let e = 0.5 / n.max(1) as f64;
    p.clamp(e, 1.0 - e)
}
