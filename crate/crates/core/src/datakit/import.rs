use std::path::{Path, PathBuf};

use super::volume::{ClipVolume, VolumeData};
use crate::error::{Result, SkidError};
use crate::framekit::Raster;
use crate::plane::Plane;

pub const IMPORT_SIDE: usize = 256;
pub const MIN_FRAME_SIDE: usize = 192;

/// Builds a clip from a directory of per-frame PNG files, taken in file-name
/// order. Frames must be square and at least 192 px; they are resized
/// bilinearly to `side` and stored as 16-bit.
pub fn import_image_dir(dir: impl AsRef<Path>, clip_id: &str, plane: Plane, side: usize) -> Result<ClipVolume> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(SkidError::Data(format!("no PNG frames in {}", dir.display())));
    }
    let mut data = Vec::with_capacity(files.len() * side * side);
    for f in &files {
        let img = image::open(f)?.into_luma16();
        let (w, h) = (img.width() as usize, img.height() as usize);
        if w != h || w < MIN_FRAME_SIDE {
            return Err(SkidError::Data(format!(
                "{}: frame is {w}x{h}; frames must be square and at least {MIN_FRAME_SIDE} px",
                f.display()
            )));
        }
        let r = Raster::from_vec(h, w, img.as_raw().iter().map(|&v| v as f64 / u16::MAX as f64).collect())?;
        let r = if w == side { r } else { r.resize_bilinear(side, side) };
        data.extend(r.data().iter().map(|v| (v.clamp(0.0, 1.0) * u16::MAX as f64).round() as u16));
    }
    ClipVolume::new(clip_id, plane, files.len(), side, side, VolumeData::U16(data))
}
