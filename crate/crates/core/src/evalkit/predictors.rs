use skid_autograd::{ParamStore, Tensor};

use super::sampling::ClipPredictor;
use crate::datakit::ClipVolume;
use crate::error::Result;
use crate::skidnet::DownstreamModel;

/// Downstream model over precomputed per-frame encoder features.
pub struct FeaturePredictor<'a> {
    pub model: &'a DownstreamModel,
    pub store: &'a ParamStore,
    pub features: &'a [Tensor],
}

impl ClipPredictor for FeaturePredictor<'_> {
    fn n_frames(&self) -> usize {
        self.features.len()
    }

    fn predict(&self, frames: &[usize]) -> Result<Vec<f64>> {
        let seq: Vec<&Tensor> = frames.iter().map(|&i| &self.features[i]).collect();
        Ok(self.model.predict_features(self.store, &[seq])?.remove(0))
    }
}

/// Downstream model reading frames straight from a clip volume.
pub struct VolumePredictor<'a> {
    pub model: &'a DownstreamModel,
    pub store: &'a ParamStore,
    pub clip: &'a ClipVolume,
}

impl ClipPredictor for VolumePredictor<'_> {
    fn n_frames(&self) -> usize {
        self.clip.n_frames()
    }

    fn predict(&self, frames: &[usize]) -> Result<Vec<f64>> {
        let mut uniq = frames.to_vec();
        uniq.dedup();
        let decoded = uniq.iter().map(|&i| self.clip.frame(i)).collect::<Result<Vec<_>>>()?;
        let feats = self.model.encode_frames(self.store, &decoded)?;
        let seq: Vec<&Tensor> = frames
            .iter()
            .map(|i| &feats[uniq.binary_search(i).expect("index from the same list")])
            .collect();
        Ok(self.model.predict_features(self.store, &[seq])?.remove(0))
    }
}
