use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretextTrainConfig {
    pub lr: f64,
    /// Multiplicative decay applied once per epoch.
    pub lr_decay: f64,
    pub rms_rho: f64,
    pub rms_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub plateau_patience: usize,
    /// Fixed validation samples drawn per validation clip.
    pub val_samples_per_clip: usize,
    pub seed: u64,
    /// Where a diagnostic checkpoint goes if the loss turns non-finite.
    pub diagnostic_dir: Option<PathBuf>,
}

impl Default for PretextTrainConfig {
    fn default() -> Self {
        PretextTrainConfig {
            lr: 1e-4,
            lr_decay: 0.95,
            rms_rho: 0.9,
            rms_eps: 1e-7,
            batch_size: 16,
            max_epochs: 30,
            plateau_patience: 5,
            val_samples_per_clip: 1,
            seed: 0,
            diagnostic_dir: None,
        }
    }
}

pub fn lr_at(lr0: f64, decay: f64, epoch: usize) -> f64 {
    lr0 * decay.powi(epoch as i32)
}

fn check_schedule(lr: f64, decay: f64, rho: f64, eps: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(invalid(format!("lr {lr} must be positive")));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(invalid(format!("lr_decay {decay} must lie in (0, 1]")));
    }
    if !(0.0..1.0).contains(&rho) || eps <= 0.0 {
        return Err(invalid("RMSProp needs 0 <= rho < 1 and eps > 0"));
    }
    Ok(())
}

impl PretextTrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_schedule(self.lr, self.lr_decay, self.rms_rho, self.rms_eps)?;
        if self.batch_size == 0 || self.max_epochs == 0 || self.val_samples_per_clip == 0 {
            return Err(invalid("batch_size, max_epochs and val_samples_per_clip must be positive"));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_at(self.lr, self.lr_decay, epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownstreamTrainConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub rms_rho: f64,
    pub rms_eps: f64,
    pub max_epochs: usize,
    pub frames_per_clip: usize,
    /// Clips per optimizer step.
    pub batch_size: usize,
    /// Positive-class weights; `None` uses negatives / positives per label
    /// on the training clips.
    pub pos_weights: Option<Vec<f64>>,
    pub eval_frames: usize,
    pub eval_repeats: usize,
    pub seed: u64,
    pub diagnostic_dir: Option<PathBuf>,
}

impl Default for DownstreamTrainConfig {
    fn default() -> Self {
        DownstreamTrainConfig {
            lr: 1e-5,
            lr_decay: 0.95,
            rms_rho: 0.9,
            rms_eps: 1e-7,
            max_epochs: 20,
            frames_per_clip: 16,
            batch_size: 1,
            pos_weights: None,
            eval_frames: 16,
            eval_repeats: 8,
            seed: 0,
            diagnostic_dir: None,
        }
    }
}

impl DownstreamTrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_schedule(self.lr, self.lr_decay, self.rms_rho, self.rms_eps)?;
        if self.frames_per_clip == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(invalid("frames_per_clip, batch_size and max_epochs must be positive"));
        }
        if self.eval_frames == 0 || self.eval_repeats == 0 {
            return Err(invalid("eval_frames and eval_repeats must be positive"));
        }
        if let Some(w) = &self.pos_weights {
            if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(invalid("positive-class weights must be positive"));
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_at(self.lr, self.lr_decay, epoch)
    }
}
