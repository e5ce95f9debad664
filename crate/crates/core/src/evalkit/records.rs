use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SkidError};
use crate::plane::Plane;

/// One classifier's output for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub clip_id: String,
    pub plane: Plane,
    pub probs: Vec<f64>,
    pub labels: Vec<u8>,
}

impl PredictionRecord {
    pub fn new(clip_id: impl Into<String>, plane: Plane, probs: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("probabilities must be finite and in [0, 1]"));
        }
        if probs.len() != labels.len() {
            return Err(invalid("probabilities and labels differ in length"));
        }
        Ok(PredictionRecord {
            clip_id: clip_id.into(),
            plane,
            probs,
            labels,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    clip_id: String,
    plane: Plane,
    p_abn: f64,
    p_acl: f64,
    p_men: f64,
    y_abn: u8,
    y_acl: u8,
    y_men: u8,
}

/// `clip_id,plane,p_abn,p_acl,p_men,y_abn,y_acl,y_men`
pub fn write_records(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        if r.probs.len() != 3 {
            return Err(invalid(format!("record {} has {} labels; the CSV holds 3", r.clip_id, r.probs.len())));
        }
        w.serialize(Row {
            clip_id: r.clip_id.clone(),
            plane: r.plane,
            p_abn: r.probs[0],
            p_acl: r.probs[1],
            p_men: r.probs[2],
            y_abn: r.labels[0],
            y_acl: r.labels[1],
            y_men: r.labels[2],
        })?;
    }
    let bytes = w.into_inner().map_err(|e| SkidError::Io(e.into_error()))?;
    crate::io_util::write_atomic(path.as_ref(), &bytes)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| SkidError::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?;
        out.push(
            PredictionRecord::new(
                row.clip_id,
                row.plane,
                vec![row.p_abn, row.p_acl, row.p_men],
                vec![row.y_abn, row.y_acl, row.y_men],
            )
            .map_err(|e| SkidError::Parse {
                line: i + 2,
                msg: e.to_string(),
            })?,
        );
    }
    Ok(out)
}
