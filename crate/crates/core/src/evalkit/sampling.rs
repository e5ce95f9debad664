use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};

pub const EVAL_FRAMES: usize = 16;
pub const EVAL_REPEATS: usize = 8;

/// One unrounded draw from Normal(N_F/2, N_F/4).
pub fn raw_eval_draw<R: Rng + ?Sized>(n_frames: usize, rng: &mut R) -> f64 {
    let n = n_frames as f64;
    Normal::new(n / 2.0, n / 4.0).expect("finite positive sigma").sample(rng)
}

/// `count` frame indices around the clip centre: rounded, clipped to
/// `[0, N_F-1]` and sorted.
pub fn sample_eval_frames<R: Rng + ?Sized>(n_frames: usize, count: usize, rng: &mut R) -> Vec<usize> {
    if n_frames == 0 {
        return Vec::new();
    }
    let top = (n_frames - 1) as f64;
    let mut idx: Vec<usize> = (0..count)
        .map(|_| raw_eval_draw(n_frames, rng).round().clamp(0.0, top) as usize)
        .collect();
    idx.sort_unstable();
    idx
}

/// Anything that maps a list of frame indices of one clip to per-label
/// probabilities.
pub trait ClipPredictor {
    fn n_frames(&self) -> usize;
    fn predict(&self, frames: &[usize]) -> Result<Vec<f64>>;
}

/// Mean of `repeats` predictions, each on a fresh draw of `count` frames.
pub fn predict_clip<P: ClipPredictor + ?Sized, R: Rng + ?Sized>(
    model: &P,
    count: usize,
    repeats: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if repeats == 0 || count == 0 {
        return Err(invalid("repeats and frame count must be positive"));
    }
    let n = model.n_frames();
    if n == 0 {
        return Err(crate::SkidError::Data("clip has zero frames".into()));
    }
    // running mean: exact when every repeat returns the same vector
    let mut mean: Vec<f64> = Vec::new();
    for k in 0..repeats {
        let p = model.predict(&sample_eval_frames(n, count, rng))?;
        if k == 0 {
            mean = p;
            continue;
        }
        if p.len() != mean.len() {
            return Err(invalid("predictions differ in length between repeats"));
        }
        for (m, v) in mean.iter_mut().zip(&p) {
            *m += (v - *m) / (k + 1) as f64;
        }
    }
    Ok(mean)
}
