use std::path::PathBuf;

use skid_autograd::AutogradError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, SkidError>;

#[derive(Debug, Error)]
pub enum SkidError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("cannot build {block}: {msg}")]
    Construction { block: String, msg: String },

    #[error("metric undefined for class {class}: {reason}")]
    UndefinedMetric { class: usize, reason: String },

    #[error("non-finite {what}{}", diagnostic.as_ref().map(|p| format!(" (diagnostic checkpoint at {})", p.display())).unwrap_or_default())]
    NonFinite {
        what: String,
        diagnostic: Option<PathBuf>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Autograd(#[from] AutogradError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub(crate) fn invalid(msg: impl Into<String>) -> SkidError {
    SkidError::InvalidArgument(msg.into())
}
