use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{clip_path, labels_path, write_labels, LabelSchema, Split};
use super::volume::{save_clip, ClipVolume};
use crate::error::{invalid, Result};
use skid_autograd::exec;
use crate::framekit::Raster;
use crate::plane::Plane;
use crate::rng::{stream_rng, SkidRng};

/// MRNet training-split label frequencies (abnormal, ACL, meniscus) over 1130 clips.
pub const MRNET_TRAIN_CLIPS: usize = 1130;
pub const MRNET_TRAIN_POSITIVES: [usize; 3] = [917, 208, 397];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    /// Positive rate per label; ACL and meniscus positives are drawn from
    /// the abnormal clips.
    pub prevalence: [f64; 3],
    pub frame_side: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub planes: Vec<Plane>,
    pub motif_contrast: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::mrnet_scaled(0.1)
    }
}

impl SyntheticSpec {
    /// MRNet-like proportions with 1130·scale training clips and
    /// 120·scale validation / test clips.
    pub fn mrnet_scaled(scale: f64) -> Self {
        let n = |base: f64| ((base * scale).round() as usize).max(1);
        SyntheticSpec {
            n_train: n(MRNET_TRAIN_CLIPS as f64),
            n_valid: n(120.0),
            n_test: n(120.0),
            prevalence: MRNET_TRAIN_POSITIVES.map(|p| p as f64 / MRNET_TRAIN_CLIPS as f64),
            frame_side: 256,
            min_frames: 20,
            max_frames: 32,
            planes: Plane::ALL.to_vec(),
            motif_contrast: 0.35,
            noise: 0.02,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_side < 192 {
            return Err(invalid(format!("frame side {} is below 192", self.frame_side)));
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(invalid("need 1 <= min_frames <= max_frames"));
        }
        if self.prevalence.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("prevalences must lie in [0, 1]"));
        }
        if self.planes.is_empty() {
            return Err(invalid("at least one plane"));
        }
        if self.n_train == 0 {
            return Err(invalid("n_train must be positive"));
        }
        Ok(())
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Valid => self.n_valid,
            Split::Test => self.n_test,
        }
    }
}

/// Exact positive counts for `n` clips: per-label rounding of `n · rate`,
/// with ACL and meniscus capped at the abnormal count.
pub fn positive_counts(n: usize, prevalence: [f64; 3]) -> [usize; 3] {
    let r = |p: f64| ((n as f64 * p).round() as usize).min(n);
    let abn = r(prevalence[0]);
    [abn, r(prevalence[1]).min(abn), r(prevalence[2]).min(abn)]
}

/// Labels for one split, deterministic in `rng`.
pub fn assign_labels(n: usize, prevalence: [f64; 3], rng: &mut SkidRng) -> Vec<[u8; 3]> {
    let [n_abn, n_acl, n_men] = positive_counts(n, prevalence);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut labels = vec![[0u8; 3]; n];
    let mut abnormal: Vec<usize> = idx[..n_abn].to_vec();
    for &i in &abnormal {
        labels[i][0] = 1;
    }
    abnormal.shuffle(rng);
    for &i in &abnormal[..n_acl] {
        labels[i][1] = 1;
    }
    abnormal.shuffle(rng);
    for &i in &abnormal[..n_men] {
        labels[i][2] = 1;
    }
    labels
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    cy: f64,
    cx: f64,
    sigma: f64,
    amp: f64,
}

/// Planted structure for one label: position in normalized coordinates.
#[derive(Debug, Clone, Copy)]
struct Motif {
    cy: f64,
    cx: f64,
    angle: f64,
}

#[derive(Debug, Clone)]
struct Anatomy {
    shift: (f64, f64),
    radii: (f64, f64),
    blobs: Vec<Blob>,
    motifs: [Option<Motif>; 3],
}

/// Home cell (row-major in the 3x3 grid) of each label's motif.
const MOTIF_CELLS: [usize; 3] = [4, 3, 7];

fn cell_center(cell: usize) -> (f64, f64) {
    let (r, c) = (cell / 3, cell % 3);
    ((r as f64 + 0.5) / 3.0, (c as f64 + 0.5) / 3.0)
}

fn draw_anatomy(plane: Plane, labels: [u8; 3], rng: &mut SkidRng) -> Anatomy {
    let radii = match plane {
        Plane::Sagittal => (0.30, 0.18),
        Plane::Coronal => (0.18, 0.30),
        Plane::Axial => (0.24, 0.24),
    };
    let blobs = (0..4)
        .map(|k| Blob {
            cy: [0.2, 0.25, 0.75, 0.8][k] + rng.random_range(-0.04..0.04),
            cx: [0.2, 0.8, 0.25, 0.75][k] + rng.random_range(-0.04..0.04),
            sigma: rng.random_range(0.05..0.09),
            amp: rng.random_range(0.08..0.18),
        })
        .collect();
    let mut motifs = [None; 3];
    for (j, m) in motifs.iter_mut().enumerate() {
        // drawn for every label so negatives consume the same stream
        let (cy, cx) = cell_center(MOTIF_CELLS[j]);
        let motif = Motif {
            cy: cy + rng.random_range(-0.03..0.03),
            cx: cx + rng.random_range(-0.03..0.03),
            angle: PI / 4.0 + rng.random_range(-0.2..0.2),
        };
        if labels[j] == 1 {
            *m = Some(motif);
        }
    }
    Anatomy {
        shift: (rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03)),
        radii,
        blobs,
        motifs,
    }
}

fn smoothstep(edge: f64, x: f64) -> f64 {
    // 1 inside (x < edge - w), 0 outside (x > edge + w)
    let w = 0.04;
    let t = ((edge + w - x) / (2.0 * w)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn render_frame(spec: &SyntheticSpec, a: &Anatomy, t: usize, n_frames: usize, rng: &mut SkidRng) -> Raster {
    let side = spec.frame_side;
    let depth = (PI * (t as f64 + 0.5) / n_frames as f64).sin();
    let central = 4 * t + 2 >= n_frames && 4 * t < 3 * n_frames;
    let c = spec.motif_contrast;
    let noise: Vec<f64> = (0..side * side)
        .map(|_| if spec.noise > 0.0 { rng.random_range(-spec.noise..spec.noise) } else { 0.0 })
        .collect();
    Raster::from_fn(side, side, |y, x| {
        let v = (y as f64 + 0.5) / side as f64;
        let u = (x as f64 + 0.5) / side as f64;
        let mut p = 0.08 + 0.22 * v + 0.08 * u;
        let (ry, rx) = (a.radii.0 * (0.6 + 0.4 * depth), a.radii.1 * (0.6 + 0.4 * depth));
        let dy = (v - 0.42 - a.shift.0) / ry;
        let dx = (u - 0.5 - a.shift.1) / rx;
        p += 0.28 * smoothstep(1.0, (dy * dy + dx * dx).sqrt());
        let dy2 = (v - 0.78 - a.shift.0) / (0.6 * ry);
        let dx2 = (u - 0.5 - a.shift.1) / (1.2 * rx);
        p += 0.15 * smoothstep(1.0, (dy2 * dy2 + dx2 * dx2).sqrt());
        for b in &a.blobs {
            let d2 = (v - b.cy).powi(2) + (u - b.cx).powi(2);
            p += b.amp * (-d2 / (2.0 * b.sigma * b.sigma)).exp();
        }
        if central {
            if let Some(m) = a.motifs[0] {
                let r = ((v - m.cy).powi(2) + (u - m.cx).powi(2)).sqrt();
                p += c * smoothstep(0.07, r);
            }
            if let Some(m) = a.motifs[1] {
                let (dy, dx) = (v - m.cy, u - m.cx);
                let along = dy * m.angle.sin() + dx * m.angle.cos();
                let across = -dy * m.angle.cos() + dx * m.angle.sin();
                if along.abs() < 0.09 {
                    p += c * (-(across * across) / (2.0 * 0.008f64.powi(2))).exp();
                }
            }
            if let Some(m) = a.motifs[2] {
                let (dy, dx) = (v - m.cy, u - m.cx);
                // wedge opening to the right, apex at the motif center
                if (-0.03..0.08).contains(&dx) && dy.abs() <= 0.6 * (dx + 0.03) {
                    p -= c;
                }
            }
        }
        (p + noise[y * side + x]).clamp(0.0, 1.0)
    })
}

/// Renders one clip; deterministic in (spec, labels, rng state).
pub fn synth_clip(spec: &SyntheticSpec, clip_id: &str, plane: Plane, labels: [u8; 3], rng: &mut SkidRng) -> Result<ClipVolume> {
    let n_frames = rng.random_range(spec.min_frames..=spec.max_frames);
    let a = draw_anatomy(plane, labels, rng);
    let frames: Vec<Raster> = (0..n_frames).map(|t| render_frame(spec, &a, t, n_frames, rng)).collect();
    let mut v = ClipVolume::from_rasters_u8(clip_id, plane, &frames)?;
    v.labels = labels.to_vec();
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: Split,
    pub clips: usize,
    pub positives: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSummary {
    pub root: PathBuf,
    pub splits: Vec<SplitSummary>,
}

/// Writes `root/<split>/labels.csv` and every plane volume of every clip.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, root: impl AsRef<Path>) -> Result<SyntheticSummary> {
    spec.validate()?;
    let root = root.as_ref();
    let mut splits = Vec::new();
    for (si, split) in Split::ALL.into_iter().enumerate() {
        let n = spec.count(split);
        if n == 0 {
            continue;
        }
        let mut rng = stream_rng(spec.seed, (si as u64) << 40);
        let labels = assign_labels(n, spec.prevalence, &mut rng);
        let ids: Vec<String> = (0..n).map(|i| format!("{}{:05}", &split.as_str()[..2], i)).collect();
        let jobs = n * spec.planes.len();
        let results = exec::map_indexed(jobs, |job| -> Result<()> {
            let (i, pi) = (job / spec.planes.len(), job % spec.planes.len());
            let plane = spec.planes[pi];
            let mut rng = stream_rng(spec.seed, ((si as u64) << 40) + 1 + ((i as u64) << 2) + plane.index() as u64);
            let v = synth_clip(spec, &ids[i], plane, labels[i], &mut rng)?;
            save_clip(&v, clip_path(root, split, plane, &ids[i]))
        });
        results.into_iter().collect::<Result<Vec<()>>>()?;
        let rows: Vec<(String, Vec<u8>)> = ids.iter().cloned().zip(labels.iter().map(|l| l.to_vec())).collect();
        write_labels(labels_path(root, split), LabelSchema::Mrnet3, &rows)?;
        let mut positives = [0; 3];
        for l in &labels {
            for j in 0..3 {
                positives[j] += l[j] as usize;
            }
        }
        splits.push(SplitSummary {
            split,
            clips: n,
            positives,
        });
    }
    Ok(SyntheticSummary {
        root: root.to_path_buf(),
        splits,
    })
}
