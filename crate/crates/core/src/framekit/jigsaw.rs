use rand::Rng;
use skid_autograd::exec;

use super::augment::{add_awgn, augment_patch, AugmentationSpec};
use super::raster::{Frame, Raster};
use crate::arrangements::{perfect_square_root, ArrangementSet};
use crate::error::{invalid, Result};
use crate::rng::{stream_rng, SkidRng};

/// Side of the square patches fed to each encoder branch.
pub const PATCH_SIDE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// Augmentation, random crop origin and noise as configured.
    Train,
    /// No augmentation or noise; crop origin fixed at the centre. The
    /// arrangement is still drawn at random.
    Validation,
}

/// Jumbled patches for one frame and the label of the arrangement applied.
#[derive(Debug, Clone, PartialEq)]
pub struct JumbledSample {
    pub patches: Vec<Raster>,
    pub label: usize,
    /// Crop origin (row, col) within each partition cell, indexed by source
    /// (pre-jumble) patch.
    pub origins: Vec<(usize, usize)>,
}

fn grid_side(n_patches: usize) -> Result<usize> {
    perfect_square_root(n_patches)
        .filter(|&r| r > 0)
        .ok_or_else(|| invalid(format!("n_patches={n_patches} is not a perfect square")))
}

/// Splits a frame into `n_patches` row-major cells of side floor(L/√N);
/// trailing pixels on each axis are dropped.
pub fn partition_frame(f: &Frame, n_patches: usize) -> Result<Vec<Raster>> {
    let g = grid_side(n_patches)?;
    let l = f.side();
    if l < g * PATCH_SIDE {
        return Err(invalid(format!(
            "frame side {l} < {} needed for {g}x{g} cells of {PATCH_SIDE}px",
            g * PATCH_SIDE
        )));
    }
    let cell = l / g;
    (0..n_patches)
        .map(|i| f.pixels().crop((i / g) * cell, (i % g) * cell, cell, cell))
        .collect()
}

pub fn center_origin(side: usize) -> usize {
    side.saturating_sub(PATCH_SIDE) / 2
}

pub fn crop_at(p: &Raster, row: usize, col: usize) -> Result<Raster> {
    if p.height() < PATCH_SIDE || p.width() < PATCH_SIDE {
        return Err(invalid(format!(
            "cannot crop {PATCH_SIDE}x{PATCH_SIDE} from {}x{}",
            p.height(),
            p.width()
        )));
    }
    p.crop(row, col, PATCH_SIDE, PATCH_SIDE)
}

/// Random 64×64 crop; the origin is uniform over [0, side-64] per axis.
pub fn crop64<R: Rng + ?Sized>(p: &Raster, rng: &mut R) -> Result<(Raster, (usize, usize))> {
    if p.height() < PATCH_SIDE || p.width() < PATCH_SIDE {
        return Err(invalid(format!(
            "cannot crop {PATCH_SIDE}x{PATCH_SIDE} from {}x{}",
            p.height(),
            p.width()
        )));
    }
    let row = rng.random_range(0..=p.height() - PATCH_SIDE);
    let col = rng.random_range(0..=p.width() - PATCH_SIDE);
    Ok((p.crop(row, col, PATCH_SIDE, PATCH_SIDE)?, (row, col)))
}

/// Identity-order, centre-cropped patches: the encoder input used for
/// downstream frames and the geometric baseline.
pub fn canonical_patches(f: &Frame, n_patches: usize) -> Result<Vec<Raster>> {
    partition_frame(f, n_patches)?
        .iter()
        .map(|cell| {
            let o = center_origin(cell.height());
            crop_at(cell, o, o)
        })
        .collect()
}

fn prepare_source_patches<R: Rng + ?Sized>(
    f: &Frame,
    n_patches: usize,
    spec: &AugmentationSpec,
    mode: PipelineMode,
    rng: &mut R,
) -> Result<(Vec<Raster>, Vec<(usize, usize)>)> {
    let cells = partition_frame(f, n_patches)?;
    let mut patches = Vec::with_capacity(n_patches);
    let mut origins = Vec::with_capacity(n_patches);
    for cell in &cells {
        let (mut patch, origin) = match mode {
            PipelineMode::Train => {
                let aug = augment_patch(cell, spec, rng);
                crop64(&aug, rng)?
            }
            PipelineMode::Validation => {
                let o = center_origin(cell.height());
                (crop_at(cell, o, o)?, (o, o))
            }
        };
        if mode == PipelineMode::Train && spec.noise {
            add_awgn(&mut patch, spec.awgn_mean, spec.awgn_var, rng);
        }
        patches.push(patch);
        origins.push(origin);
    }
    Ok((patches, origins))
}

/// Partition, augment and crop every cell, add noise, then draw one
/// arrangement uniformly from `aset` and jumble the patches with it.
pub fn prepfram<R: Rng + ?Sized>(
    f: &Frame,
    aset: &ArrangementSet,
    spec: &AugmentationSpec,
    mode: PipelineMode,
    rng: &mut R,
) -> Result<JumbledSample> {
    let (patches, origins) = prepare_source_patches(f, aset.n_patches(), spec, mode, rng)?;
    let label = rng.random_range(0..aset.len());
    jumble(patches, origins, aset, label)
}

/// As [`prepfram`] with the arrangement label fixed by the caller.
pub fn prepfram_with_label<R: Rng + ?Sized>(
    f: &Frame,
    aset: &ArrangementSet,
    spec: &AugmentationSpec,
    mode: PipelineMode,
    label: usize,
    rng: &mut R,
) -> Result<JumbledSample> {
    if label >= aset.len() {
        return Err(invalid(format!("label {label} >= K={}", aset.len())));
    }
    let (patches, origins) = prepare_source_patches(f, aset.n_patches(), spec, mode, rng)?;
    jumble(patches, origins, aset, label)
}

fn jumble(
    patches: Vec<Raster>,
    origins: Vec<(usize, usize)>,
    aset: &ArrangementSet,
    label: usize,
) -> Result<JumbledSample> {
    let a = aset.get(label).expect("label < K");
    Ok(JumbledSample {
        patches: a.apply(&patches)?,
        label,
        origins,
    })
}

/// Arrangement set plus augmentation settings, checked for consistency once.
#[derive(Debug, Clone)]
pub struct JigsawPipeline {
    aset: ArrangementSet,
    spec: AugmentationSpec,
}

impl JigsawPipeline {
    pub fn new(aset: ArrangementSet, n_patches: usize, spec: AugmentationSpec) -> Result<Self> {
        grid_side(n_patches)?;
        aset.ensure_patches(n_patches)?;
        Ok(JigsawPipeline { aset, spec })
    }

    pub fn aset(&self) -> &ArrangementSet {
        &self.aset
    }

    pub fn spec(&self) -> &AugmentationSpec {
        &self.spec
    }

    pub fn sample(&self, f: &Frame, mode: PipelineMode, rng: &mut SkidRng) -> Result<JumbledSample> {
        prepfram(f, &self.aset, &self.spec, mode, rng)
    }
}

/// Runs the pipeline over a batch. Sample `i` uses RNG stream
/// `stream_base + i` of `seed`, so output is independent of threading.
pub fn prepare_batch(
    frames: &[&Frame],
    pipeline: &JigsawPipeline,
    mode: PipelineMode,
    seed: u64,
    stream_base: u64,
) -> Result<Vec<JumbledSample>> {
    exec::map_indexed(frames.len(), |i| {
        let mut rng = stream_rng(seed, stream_base + i as u64);
        pipeline.sample(frames[i], mode, &mut rng)
    })
    .into_iter()
    .collect()
}
