use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkidError};
use crate::io_util::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    /// Per-label AUC on validation (downstream only).
    #[serde(default)]
    pub val_auc: Vec<Option<f64>>,
    #[serde(default)]
    pub val_label_accuracy: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub task: String,
    pub config: serde_json::Value,
    #[serde(default)]
    pub label_names: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub wall_clock_s: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainLog {
    pub fn new(task: &str, config: serde_json::Value, label_names: Vec<String>) -> Self {
        TrainLog {
            task: task.to_string(),
            config,
            label_names,
            epochs: Vec::new(),
            best_epoch: None,
            stopped_early: false,
            wall_clock_s: 0.0,
        }
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["epoch", "lr", "train_loss", "train_accuracy", "val_loss", "val_accuracy"]
            .map(String::from)
            .to_vec();
        for n in &self.label_names {
            header.push(format!("val_auc_{n}"));
        }
        for n in &self.label_names {
            header.push(format!("val_acc_{n}"));
        }
        header.push("seconds".into());
        w.write_record(&header)?;
        for e in &self.epochs {
            let mut row = vec![
                e.epoch.to_string(),
                e.lr.to_string(),
                e.train_loss.to_string(),
                opt(e.train_accuracy),
                opt(e.val_loss),
                opt(e.val_accuracy),
            ];
            for j in 0..self.label_names.len() {
                row.push(opt(e.val_auc.get(j).copied().flatten()));
            }
            for j in 0..self.label_names.len() {
                row.push(opt(e.val_label_accuracy.get(j).copied()));
            }
            row.push(e.seconds.to_string());
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| SkidError::Io(e.into_error()))
    }

    /// Writes `<stem>.csv` (one row per epoch) and `<stem>.json` (everything).
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        write_atomic(&dir.join(format!("{stem}.csv")), &self.to_csv()?)?;
        write_atomic(&dir.join(format!("{stem}.json")), &serde_json::to_vec_pretty(self)?)
    }
}
