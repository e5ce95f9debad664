//! Frame preparation: the jigsaw pipeline (partition, augment, crop, noise,
//! jumble) and the geometric-transformation label space used as a baseline.

mod augment;
mod geo;
mod jigsaw;
mod raster;

pub use augment::{
    add_awgn, apply_augment, augment_patch, awgn_draw, AugmentParams, AugmentationSpec,
    AugmentStep,
};
pub use geo::{apply_geo_transform, enumerate_geo_transforms, geo_class_of, GeoTransform, GEO_CLASSES};
pub use jigsaw::{
    canonical_patches, center_origin, crop64, crop_at, partition_frame, prepare_batch, prepfram,
    prepfram_with_label, JigsawPipeline, JumbledSample, PipelineMode, PATCH_SIDE,
};
pub use raster::{Frame, Raster};
