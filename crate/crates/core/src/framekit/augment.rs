use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentStep {
    Scale,
    Rotate,
    Shift,
}

/// Per-patch augmentation ranges and toggles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationSpec {
    /// Max |shift| as a fraction of the patch side; shifts are integers in
    /// [-floor(frac·side), floor(frac·side)].
    pub shift_frac: f64,
    pub rot_range_deg: f64,
    pub scales: Vec<f64>,
    pub awgn_mean: f64,
    pub awgn_var: f64,
    pub shift: bool,
    pub rotate: bool,
    pub scale: bool,
    pub noise: bool,
    pub order: [AugmentStep; 3],
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            shift_frac: 0.1,
            rot_range_deg: 15.0,
            scales: vec![1.0, 1.2],
            awgn_mean: 0.0,
            awgn_var: 0.01,
            shift: true,
            rotate: true,
            scale: true,
            noise: true,
            order: [AugmentStep::Scale, AugmentStep::Rotate, AugmentStep::Shift],
        }
    }
}

impl AugmentationSpec {
    /// Every augmentation and the noise switched off.
    pub fn disabled() -> Self {
        AugmentationSpec {
            shift: false,
            rotate: false,
            scale: false,
            noise: false,
            ..Default::default()
        }
    }

    pub fn geometric_enabled(&self) -> bool {
        self.shift || self.rotate || self.scale
    }

    pub fn max_shift(&self, side: usize) -> i64 {
        (self.shift_frac * side as f64).floor() as i64
    }

    /// Draws one parameter set for a patch of side `side`, in the order
    /// scale, rotation, shift-x, shift-y. Disabled steps consume no
    /// randomness.
    pub fn draw<R: Rng + ?Sized>(&self, side: usize, rng: &mut R) -> AugmentParams {
        let scale = if self.scale && !self.scales.is_empty() {
            self.scales[rng.random_range(0..self.scales.len())]
        } else {
            1.0
        };
        let angle_deg = if self.rotate && self.rot_range_deg > 0.0 {
            rng.random_range(-self.rot_range_deg..=self.rot_range_deg)
        } else {
            0.0
        };
        let shift = if self.shift {
            let m = self.max_shift(side);
            (rng.random_range(-m..=m), rng.random_range(-m..=m))
        } else {
            (0, 0)
        };
        AugmentParams {
            scale,
            angle_deg,
            shift,
            order: self.order,
        }
    }
}

/// Concrete augmentation for one patch. `shift` is (dx, dy): +dx moves
/// content right, +dy moves it down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub scale: f64,
    pub angle_deg: f64,
    pub shift: (i64, i64),
    pub order: [AugmentStep; 3],
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams {
            scale: 1.0,
            angle_deg: 0.0,
            shift: (0, 0),
            order: [AugmentStep::Scale, AugmentStep::Rotate, AugmentStep::Shift],
        }
    }
}

/// Magnifies about the centre by `s`; output keeps the input size.
pub(crate) fn scale_about_center(p: &Raster, s: f64) -> Raster {
    if s == 1.0 {
        return p.clone();
    }
    let cy = (p.height() as f64 - 1.0) / 2.0;
    let cx = (p.width() as f64 - 1.0) / 2.0;
    Raster::from_fn(p.height(), p.width(), |y, x| {
        p.sample_bilinear(cy + (y as f64 - cy) / s, cx + (x as f64 - cx) / s)
    })
}

/// Rotates about the centre by `deg` (positive = counter-clockwise as
/// displayed, rows growing downwards). Uncovered pixels are zero.
pub(crate) fn rotate_about_center(p: &Raster, deg: f64) -> Raster {
    if deg == 0.0 {
        return p.clone();
    }
    let (sin, cos) = deg.to_radians().sin_cos();
    let cy = (p.height() as f64 - 1.0) / 2.0;
    let cx = (p.width() as f64 - 1.0) / 2.0;
    Raster::from_fn(p.height(), p.width(), |y, x| {
        let (dy, dx) = (y as f64 - cy, x as f64 - cx);
        // inverse map: rotate the output coordinate back by -deg
        let sx = cx + cos * dx - sin * dy;
        let sy = cy + sin * dx + cos * dy;
        p.sample_bilinear(sy, sx)
    })
}

/// Integer translation; vacated pixels are zero.
pub(crate) fn shift(p: &Raster, dx: i64, dy: i64) -> Raster {
    if dx == 0 && dy == 0 {
        return p.clone();
    }
    let (h, w) = (p.height() as i64, p.width() as i64);
    Raster::from_fn(p.height(), p.width(), |y, x| {
        let (sy, sx) = (y as i64 - dy, x as i64 - dx);
        if sy < 0 || sx < 0 || sy >= h || sx >= w {
            0.0
        } else {
            p.get(sy as usize, sx as usize)
        }
    })
}

pub fn apply_augment(p: &Raster, params: &AugmentParams) -> Raster {
    let mut out = p.clone();
    for step in params.order {
        out = match step {
            AugmentStep::Scale => scale_about_center(&out, params.scale),
            AugmentStep::Rotate => rotate_about_center(&out, params.angle_deg),
            AugmentStep::Shift => shift(&out, params.shift.0, params.shift.1),
        };
    }
    out
}

/// Draws parameters from `spec` and applies them. Noise is not part of this
/// step; see [`add_awgn`].
pub fn augment_patch<R: Rng + ?Sized>(p: &Raster, spec: &AugmentationSpec, rng: &mut R) -> Raster {
    let params = spec.draw(p.height(), rng);
    apply_augment(p, &params)
}

/// One raw (unclipped) additive-noise value.
pub fn awgn_draw<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    Normal::new(mean, var.sqrt())
        .expect("variance is non-negative")
        .sample(rng)
}

/// Adds white Gaussian noise to every pixel and clips to [0, 1].
pub fn add_awgn<R: Rng + ?Sized>(p: &mut Raster, mean: f64, var: f64, rng: &mut R) {
    let normal = Normal::new(mean, var.sqrt()).expect("variance is non-negative");
    for v in p.data_mut() {
        *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
    }
}
