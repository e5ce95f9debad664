use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cam::SaliencyMap;
use crate::error::{invalid, Result};
use crate::framekit::{apply_geo_transform, Frame, GeoTransform, Raster};
use crate::plane::Plane;

pub const OVERLAY_ALPHA: f64 = 0.4;

/// Jet colormap on [0, 1].
pub fn jet(v: f64) -> [f64; 3] {
    let v = v.clamp(0.0, 1.0);
    let ch = |c: f64| (1.5 - (4.0 * v - c).abs()).clamp(0.0, 1.0);
    [ch(3.0), ch(2.0), ch(1.0)]
}

pub fn overlay_image(map: &SaliencyMap, frame: &Frame) -> Result<image::RgbImage> {
    let side = frame.side();
    if map.values.height() != side || map.values.width() != side {
        return Err(invalid(format!(
            "map is {}x{}, frame is {side}x{side}",
            map.values.height(),
            map.values.width()
        )));
    }
    let mut img = image::RgbImage::new(side as u32, side as u32);
    for y in 0..side {
        for x in 0..side {
            let g = frame.pixels().get(y, x);
            let c = jet(map.values.get(y, x));
            let px = c.map(|ci| (((1.0 - OVERLAY_ALPHA) * g + OVERLAY_ALPHA * ci).clamp(0.0, 1.0) * 255.0).round() as u8);
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    Ok(img)
}

pub fn render_overlay(map: &SaliencyMap, frame: &Frame, out: impl AsRef<Path>) -> Result<()> {
    let out = out.as_ref();
    if let Some(d) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    overlay_image(map, frame)?.save(out)?;
    Ok(())
}

/// Writes `<stem>_<index>.png` for each (map, frame) pair.
pub fn render_overlays(maps: &[SaliencyMap], frames: &[Frame], dir: impl AsRef<Path>, stem: &str) -> Result<Vec<PathBuf>> {
    if maps.len() != frames.len() {
        return Err(invalid("one map per frame"));
    }
    let dir = dir.as_ref();
    maps.iter()
        .zip(frames)
        .enumerate()
        .map(|(i, (m, f))| {
            let p = dir.join(format!("{stem}_{i:02}.png"));
            render_overlay(m, f, &p)?;
            Ok(p)
        })
        .collect()
}

/// Pixels left empty by a geometric transform of an `side`×`side` frame.
pub fn void_mask(side: usize, t: &GeoTransform) -> Result<Vec<bool>> {
    let ones = Frame::new(Raster::filled(side, side, 1.0), Plane::Sagittal)?;
    let moved = apply_geo_transform(&ones, t)?;
    Ok(moved.pixels().data().iter().map(|&v| v < 0.5).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMassReport {
    pub maps: usize,
    pub void_area_fraction: f64,
    /// Share of total saliency that falls on void pixels.
    pub void_mass_fraction: f64,
    pub mean_void: f64,
    pub mean_interior: f64,
}

/// Saliency mass over void vs. interior pixels, pooled across maps.
pub fn saliency_mass(maps: &[(SaliencyMap, Vec<bool>)]) -> Result<SaliencyMassReport> {
    let (mut void_sum, mut int_sum, mut void_n, mut int_n) = (0.0, 0.0, 0usize, 0usize);
    for (m, mask) in maps {
        if mask.len() != m.values.data().len() {
            return Err(invalid("mask and map differ in size"));
        }
        for (&v, &is_void) in m.values.data().iter().zip(mask) {
            if is_void {
                void_sum += v;
                void_n += 1;
            } else {
                int_sum += v;
                int_n += 1;
            }
        }
    }
    let total = void_sum + int_sum;
    Ok(SaliencyMassReport {
        maps: maps.len(),
        void_area_fraction: void_n as f64 / (void_n + int_n).max(1) as f64,
        void_mass_fraction: if total > 0.0 { void_sum / total } else { 0.0 },
        mean_void: if void_n > 0 { void_sum / void_n as f64 } else { 0.0 },
        mean_interior: if int_n > 0 { int_sum / int_n as f64 } else { 0.0 },
    })
}
