use serde::Serialize;

use super::augment::{rotate_about_center, scale_about_center, shift};
use super::raster::Frame;
use crate::error::{invalid, Result};

pub const GEO_CLASSES: usize = 54;

const ROTATIONS: [f64; 3] = [-15.0, 0.0, 15.0];
const SCALES: [f64; 2] = [1.0, 1.2];

/// One element of rotations × x-shifts × y-shifts × scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoTransform {
    pub rot_deg: f64,
    pub tx: i64,
    pub ty: i64,
    pub scale: f64,
    pub class_id: usize,
}

impl GeoTransform {
    pub fn is_identity(&self) -> bool {
        self.rot_deg == 0.0 && self.tx == 0 && self.ty == 0 && self.scale == 1.0
    }
}

fn shifts(l: usize) -> [i64; 3] {
    let t = (0.1 * l as f64).floor() as i64;
    [-t, 0, t]
}

/// All 54 transforms for frames of side `l`, enumerated rotation-major, then
/// tx, ty, scale; `class_id` is the position in that order.
pub fn enumerate_geo_transforms(l: usize) -> Result<Vec<GeoTransform>> {
    if l == 0 {
        return Err(invalid("frame side must be positive"));
    }
    let t = shifts(l);
    let mut out = Vec::with_capacity(GEO_CLASSES);
    for &rot_deg in &ROTATIONS {
        for &tx in &t {
            for &ty in &t {
                for &scale in &SCALES {
                    out.push(GeoTransform {
                        rot_deg,
                        tx,
                        ty,
                        scale,
                        class_id: out.len(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of the enumeration order.
pub fn geo_class_of(rot_deg: f64, tx: i64, ty: i64, scale: f64, l: usize) -> Option<usize> {
    let t = shifts(l);
    let r = ROTATIONS.iter().position(|&v| v == rot_deg)?;
    let x = t.iter().position(|&v| v == tx)?;
    let y = t.iter().position(|&v| v == ty)?;
    let s = SCALES.iter().position(|&v| v == scale)?;
    Some(((r * 3 + x) * 3 + y) * 2 + s)
}

/// Scale, rotate, then translate the whole frame; vacated pixels are zero.
pub fn apply_geo_transform(f: &Frame, t: &GeoTransform) -> Result<Frame> {
    let p = scale_about_center(f.pixels(), t.scale);
    let p = rotate_about_center(&p, t.rot_deg);
    let p = shift(&p, t.tx, t.ty);
    // bilinear blends of [0,1] values stay in [0,1] up to rounding
    let mut p = p;
    p.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Frame::new(p, f.plane())
}
