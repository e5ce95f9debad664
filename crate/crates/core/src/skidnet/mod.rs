//! The encoder family (v1, v2, v3, no-blocks), the pretext classifier and
//! the temporal downstream heads, plus the checkpoint container.

mod checkpoint;
mod config;
mod encoder;
mod heads;
mod layers;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{copy_params, restore_params, Checkpoint, CheckpointMeta, ModelKind, CHECKPOINT_MAGIC};
pub use config::{DownstreamConfig, HeadKind, SkidConfig, Variant};
pub use encoder::{build_noblocks_encoder, DimRedBlock, Encoder, EncoderTaps, SkipBlock};
pub use heads::{build_cnn3d_head, feature_sequence, patch_batch, DownstreamModel, PretextModel};

/// Named stage of the encoder, usable as a Grad-CAM target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockId {
    Concat,
    Trunk,
    Skip1,
    DimRed1,
    Skip2,
    DimRed2,
}

impl BlockId {
    pub const ALL: [BlockId; 6] = [
        BlockId::Concat,
        BlockId::Trunk,
        BlockId::Skip1,
        BlockId::DimRed1,
        BlockId::Skip2,
        BlockId::DimRed2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockId::Concat => "concat",
            BlockId::Trunk => "trunk",
            BlockId::Skip1 => "skip1",
            BlockId::DimRed1 => "dimred1",
            BlockId::Skip2 => "skip2",
            BlockId::DimRed2 => "dimred2",
        }
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockId {
    type Err = crate::SkidError;

    fn from_str(s: &str) -> crate::Result<Self> {
        BlockId::ALL
            .into_iter()
            .find(|b| b.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| crate::SkidError::InvalidArgument(format!("unknown layer id {s:?}")))
    }
}

/// Parameter count of a configuration, computed on a symbolic store.
pub fn count_params(cfg: &SkidConfig) -> crate::Result<usize> {
    let mut store = skid_autograd::ParamStore::symbolic();
    let mut rng = crate::rng::seeded(0);
    PretextModel::build(cfg, &mut store, &mut rng)?;
    Ok(store.count())
}

/// Trainable and total parameter counts of a downstream model.
pub fn count_downstream_params(skid: &SkidConfig, cfg: &DownstreamConfig) -> crate::Result<(usize, usize)> {
    let mut store = skid_autograd::ParamStore::symbolic();
    let mut rng = crate::rng::seeded(0);
    DownstreamModel::build(skid, cfg, &mut store, &mut rng)?;
    Ok((store.trainable_count(), store.count()))
}

#[cfg(test)]
mod tests;
