//! Grad-CAM maps from encoder stages, colour overlays, and the void-region
//! saliency statistic for the geometric baseline.

mod cam;
mod overlay;

pub use cam::{cam_grids, gradcam_clip, gradcam_frame, gradcam_patches, to_frame_map, SaliencyMap};
pub use overlay::{
    jet, overlay_image, render_overlay, render_overlays, saliency_mass, void_mask, SaliencyMassReport, OVERLAY_ALPHA,
};
