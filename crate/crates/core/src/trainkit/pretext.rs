use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use skid_autograd::{exec, Graph, ParamStore, RmsProp, Var};

use super::config::PretextTrainConfig;
use super::trainlog::{EpochRecord, TrainLog};
use crate::datakit::ClipVolume;
use crate::error::{invalid, Result, SkidError};
use crate::framekit::{
    apply_geo_transform, canonical_patches, enumerate_geo_transforms, Frame, JigsawPipeline, PipelineMode, Raster,
    GEO_CLASSES,
};
use crate::rng::{stream_rng, SkidRng};
use crate::skidnet::{patch_batch, Checkpoint, CheckpointMeta, ModelKind, PretextModel};

const VAL_STREAM: u64 = 1 << 62;

/// Turns one frame into a labelled patch set.
pub trait SampleSource: Sync {
    fn n_classes(&self) -> usize;
    fn make(&self, frame: &Frame, mode: PipelineMode, rng: &mut SkidRng) -> Result<(Vec<Raster>, usize)>;
}

impl SampleSource for JigsawPipeline {
    fn n_classes(&self) -> usize {
        self.aset().len()
    }

    fn make(&self, frame: &Frame, mode: PipelineMode, rng: &mut SkidRng) -> Result<(Vec<Raster>, usize)> {
        let s = self.sample(frame, mode, rng)?;
        Ok((s.patches, s.label))
    }
}

/// The 54-way geometric-transformation task: transform the frame, then cut
/// it into canonical patches.
#[derive(Debug, Clone)]
pub struct GeoSource {
    pub n_patches: usize,
}

impl SampleSource for GeoSource {
    fn n_classes(&self) -> usize {
        GEO_CLASSES
    }

    fn make(&self, frame: &Frame, _mode: PipelineMode, rng: &mut SkidRng) -> Result<(Vec<Raster>, usize)> {
        let ts = enumerate_geo_transforms(frame.side())?;
        let label = rng.random_range(0..ts.len());
        let moved = apply_geo_transform(frame, &ts[label])?;
        Ok((canonical_patches(&moved, self.n_patches)?, label))
    }
}

struct Batch {
    patches: Vec<Vec<Raster>>,
    labels: Vec<usize>,
}

fn make_batch<S: SampleSource>(
    src: &S,
    clips: &[ClipVolume],
    picks: &[(usize, usize)],
    mode: PipelineMode,
    seed: u64,
    stream_base: u64,
) -> Result<Batch> {
    let made = exec::map_indexed(picks.len(), |i| -> Result<(Vec<Raster>, usize)> {
        let (c, f) = picks[i];
        let frame = clips[c].frame(f)?;
        let mut rng = stream_rng(seed, stream_base + i as u64);
        src.make(&frame, mode, &mut rng)
    });
    let mut batch = Batch {
        patches: Vec::with_capacity(picks.len()),
        labels: Vec::with_capacity(picks.len()),
    };
    for m in made {
        let (p, l) = m?;
        batch.patches.push(p);
        batch.labels.push(l);
    }
    Ok(batch)
}

/// Loss and correct-count of one batch; gradients are applied when `opt`
/// is given.
fn run_batch(
    model: &PretextModel,
    store: &mut ParamStore,
    batch: &Batch,
    opt: Option<&mut RmsProp>,
) -> Result<(f64, usize)> {
    let mut g = Graph::new();
    let inputs: Vec<Var> = patch_batch(&batch.patches, model.config().n_patches)?
        .into_iter()
        .map(|t| g.input(t))
        .collect();
    let (logits, _) = model.forward(&mut g, store, &inputs)?;
    let loss = g.softmax_cross_entropy(logits, &batch.labels)?;
    let lv = g.value(loss).item();
    let k = model.config().n_classes;
    let correct = g
        .value(logits)
        .data()
        .chunks(k)
        .zip(&batch.labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    if let Some(opt) = opt {
        if lv.is_finite() {
            let grads = g.backward(loss)?;
            opt.step(store, &grads)?;
        }
    }
    Ok((lv, correct))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn diagnostic_abort(
    dir: Option<&PathBuf>,
    meta: CheckpointMeta,
    store: &ParamStore,
    what: String,
) -> SkidError {
    let dir = dir.cloned().unwrap_or_else(std::env::temp_dir);
    let path = dir.join(format!("skid-diagnostic-{}.ckpt", std::process::id()));
    let saved = Checkpoint::new(meta, store.clone()).save(&path).is_ok();
    SkidError::NonFinite {
        what,
        diagnostic: saved.then_some(path),
    }
}

/// Shared loop for the jigsaw and geometric tasks. `store` ends holding the
/// parameters of the best validation epoch (or the last epoch without a
/// validation set).
pub fn train_classifier<S: SampleSource>(
    task: &str,
    src: &S,
    train: &[ClipVolume],
    valid: &[ClipVolume],
    model: &PretextModel,
    store: &mut ParamStore,
    cfg: &PretextTrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if model.config().n_classes != src.n_classes() {
        return Err(invalid(format!(
            "model head has {} outputs, task has {} classes",
            model.config().n_classes,
            src.n_classes()
        )));
    }
    let kind = if task == "geo" { ModelKind::Geo } else { ModelKind::Pretext };
    let started = Instant::now();
    let mut log = TrainLog::new(task, serde_json::to_value(cfg)?, Vec::new());

    // fixed validation samples
    let mut val_batches = Vec::new();
    if !valid.is_empty() {
        let picks: Vec<(usize, usize)> = (0..valid.len())
            .flat_map(|c| (0..cfg.val_samples_per_clip).map(move |r| (c, r)))
            .map(|(c, r)| {
                let mut rng = stream_rng(cfg.seed ^ VAL_STREAM, (c * cfg.val_samples_per_clip + r) as u64);
                (c, rng.random_range(0..valid[c].n_frames()))
            })
            .collect();
        for (bi, chunk) in picks.chunks(cfg.batch_size.max(16)).enumerate() {
            let base = VAL_STREAM + (bi * cfg.batch_size.max(16)) as u64;
            val_batches.push(make_batch(src, valid, chunk, PipelineMode::Validation, cfg.seed, base)?);
        }
    }

    let mut opt = RmsProp::new(cfg.lr, cfg.rms_rho, cfg.rms_eps);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut stale = 0;
    let mut order_rng = stream_rng(cfg.seed, 0);
    for epoch in 0..cfg.max_epochs {
        let t0 = Instant::now();
        opt.lr = cfg.lr_at(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut order_rng);
        let picks: Vec<(usize, usize)> = order
            .into_iter()
            .map(|c| (c, order_rng.random_range(0..train[c].n_frames())))
            .collect();
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0, 0);
        for (bi, chunk) in picks.chunks(cfg.batch_size).enumerate() {
            let base = ((epoch as u64 + 1) << 32) + (bi * cfg.batch_size) as u64;
            let batch = make_batch(src, train, chunk, PipelineMode::Train, cfg.seed, base)?;
            let (l, c) = run_batch(model, store, &batch, Some(&mut opt))?;
            if !l.is_finite() {
                let meta = CheckpointMeta::new(kind, model.config().clone());
                return Err(diagnostic_abort(
                    cfg.diagnostic_dir.as_ref(),
                    meta,
                    store,
                    format!("{task} loss at epoch {epoch}, batch {bi}"),
                ));
            }
            loss_sum += l * chunk.len() as f64;
            correct += c;
            seen += chunk.len();
        }
        let mut rec = EpochRecord {
            epoch,
            lr: opt.lr,
            train_loss: loss_sum / seen as f64,
            train_accuracy: Some(correct as f64 / seen as f64),
            val_loss: None,
            val_accuracy: None,
            val_auc: Vec::new(),
            val_label_accuracy: Vec::new(),
            seconds: 0.0,
        };
        if !val_batches.is_empty() {
            let (mut vl, mut vc, mut vn) = (0.0, 0, 0);
            for b in &val_batches {
                let (l, c) = run_batch(model, store, b, None)?;
                vl += l * b.labels.len() as f64;
                vc += c;
                vn += b.labels.len();
            }
            let acc = vc as f64 / vn as f64;
            rec.val_loss = Some(vl / vn as f64);
            rec.val_accuracy = Some(acc);
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, store.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
        }
        rec.seconds = t0.elapsed().as_secs_f64();
        log::info!(
            "{task} epoch {epoch}: loss {:.4} acc {:.3} val {:?}",
            rec.train_loss,
            rec.train_accuracy.unwrap_or(0.0),
            rec.val_accuracy
        );
        log.epochs.push(rec);
        if !val_batches.is_empty() && stale >= cfg.plateau_patience {
            log.stopped_early = epoch + 1 < cfg.max_epochs;
            break;
        }
    }
    match best {
        Some((_, epoch, snapshot)) => {
            *store = snapshot;
            log.best_epoch = Some(epoch);
        }
        None => log.best_epoch = log.epochs.last().map(|e| e.epoch),
    }
    log.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(log)
}

/// Jigsaw pretext training; the head width must equal the arrangement count.
pub fn train_pretext(
    train: &[ClipVolume],
    valid: &[ClipVolume],
    pipeline: &JigsawPipeline,
    model: &PretextModel,
    store: &mut ParamStore,
    cfg: &PretextTrainConfig,
) -> Result<TrainLog> {
    pipeline.aset().ensure_patches(model.config().n_patches)?;
    train_classifier("pretext", pipeline, train, valid, model, store, cfg)
}

/// 54-way geometric-transformation baseline.
pub fn train_geo_baseline(
    train: &[ClipVolume],
    valid: &[ClipVolume],
    model: &PretextModel,
    store: &mut ParamStore,
    cfg: &PretextTrainConfig,
) -> Result<TrainLog> {
    let src = GeoSource {
        n_patches: model.config().n_patches,
    };
    train_classifier("geo", &src, train, valid, model, store, cfg)
}
