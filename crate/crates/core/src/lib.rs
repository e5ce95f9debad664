//! Self-supervised jigsaw pretraining for MR video frames and the frozen-encoder
//! knee-injury classifier built on top of it.
//!
//! Modules follow the pipeline: [`arrangements`] defines the pretext label
//! space, [`framekit`] turns frames into jumbled patch sets, [`skidnet`] holds
//! the encoder family and heads, [`trainkit`] trains them, [`evalkit`] turns
//! predictions into ensembled decisions and metrics, [`interpret`] extracts
//! Grad-CAM maps and [`datakit`] handles clip storage and synthetic data.

pub mod arrangements;
pub mod datakit;
pub mod error;
pub mod evalkit;
pub mod framekit;
pub mod interpret;
pub(crate) mod io_util;
pub mod plane;
pub mod rng;
pub mod skidnet;
pub mod trainkit;

pub use error::{Result, SkidError};
pub use plane::{Plane, LABEL_NAMES, N_LABELS};
