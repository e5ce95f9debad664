use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use skid_autograd::{Graph, ParamStore, RmsProp, Tensor};

use super::config::DownstreamTrainConfig;
use super::trainlog::{EpochRecord, TrainLog};
use super::loss::{default_pos_weights, weighted_bce};
use super::pretext::diagnostic_abort;
use crate::datakit::ClipVolume;
use crate::error::{invalid, Result, SkidError};
use crate::evalkit::{auc, predict_clip, FeaturePredictor, PredictionRecord};
use crate::rng::{stream_rng, SkidRng};
use crate::skidnet::{feature_sequence, CheckpointMeta, DownstreamModel, ModelKind};

const VAL_STREAM: u64 = 1 << 61;

/// `count` sorted frame indices drawn uniformly: without replacement when
/// the clip is long enough, with replacement otherwise.
pub fn draw_train_frames<R: Rng + ?Sized>(n_frames: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = if n_frames >= count {
        index::sample(rng, n_frames, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..n_frames)).collect()
    };
    idx.sort_unstable();
    idx
}

/// Encoder features of every frame of every clip. The encoder is frozen,
/// so these never change during head training.
pub fn encode_clips(model: &DownstreamModel, store: &ParamStore, clips: &[ClipVolume]) -> Result<Vec<Vec<Tensor>>> {
    clips
        .iter()
        .map(|c| {
            if c.n_frames() == 0 {
                return Err(SkidError::Data(format!("clip {} has zero frames", c.clip_id)));
            }
            let frames = (0..c.n_frames()).map(|i| c.frame(i)).collect::<Result<Vec<_>>>()?;
            model.encode_frames(store, &frames)
        })
        .collect()
}

/// Averaged repeated predictions for each clip from cached features. Clip
/// `i` draws its frames from RNG stream `i` of `seed`.
pub fn predict_cached(
    model: &DownstreamModel,
    store: &ParamStore,
    clips: &[ClipVolume],
    features: &[Vec<Tensor>],
    eval_frames: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<PredictionRecord>> {
    clips
        .iter()
        .zip(features)
        .enumerate()
        .map(|(i, (c, f))| {
            let p = FeaturePredictor {
                model,
                store,
                features: f,
            };
            let mut rng = stream_rng(seed, i as u64);
            let probs = predict_clip(&p, eval_frames, repeats, &mut rng)?;
            PredictionRecord::new(c.clip_id.clone(), c.plane, probs, c.labels.clone())
        })
        .collect()
}

fn check_labels(clips: &[ClipVolume], n: usize) -> Result<()> {
    for c in clips {
        if c.labels.len() != n {
            return Err(SkidError::Data(format!(
                "clip {} has {} labels, model predicts {n}",
                c.clip_id,
                c.labels.len()
            )));
        }
    }
    Ok(())
}

/// Trains the temporal head on one plane with the encoder frozen.
/// Validation runs the evaluation-time frame sampling every epoch.
pub fn train_downstream(
    train: &[ClipVolume],
    valid: &[ClipVolume],
    model: &DownstreamModel,
    store: &mut ParamStore,
    cfg: &DownstreamTrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if model.encoder().param_ids().iter().any(|&id| !store.is_frozen(id)) {
        return Err(invalid("downstream training expects a frozen encoder"));
    }
    let n_labels = model.config().n_labels;
    check_labels(train, n_labels)?;
    check_labels(valid, n_labels)?;
    let pos_weights = match &cfg.pos_weights {
        Some(w) if w.len() == n_labels => w.clone(),
        Some(w) => return Err(invalid(format!("{} weights for {n_labels} labels", w.len()))),
        None => {
            let l: Vec<&[u8]> = train.iter().map(|c| c.labels.as_slice()).collect();
            default_pos_weights(&l, n_labels)
        }
    };
    let started = Instant::now();
    let mut cfg_echo = serde_json::to_value(cfg)?;
    cfg_echo["resolved_pos_weights"] = serde_json::to_value(&pos_weights)?;
    let names: Vec<String> = if n_labels == crate::N_LABELS {
        crate::LABEL_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n_labels).map(|j| format!("label{j}")).collect()
    };
    let mut log = TrainLog::new("downstream", cfg_echo, names);

    let train_feats = encode_clips(model, store, train)?;
    let valid_feats = encode_clips(model, store, valid)?;

    let mut opt = RmsProp::new(cfg.lr, cfg.rms_rho, cfg.rms_eps);
    let mut rng: SkidRng = stream_rng(cfg.seed, 0);
    for epoch in 0..cfg.max_epochs {
        let t0 = Instant::now();
        opt.lr = cfg.lr_at(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let seqs: Vec<Vec<&Tensor>> = chunk
                .iter()
                .map(|&c| {
                    draw_train_frames(train[c].n_frames(), cfg.frames_per_clip, &mut rng)
                        .into_iter()
                        .map(|f| &train_feats[c][f])
                        .collect()
                })
                .collect();
            let targets: Vec<f64> = chunk
                .iter()
                .flat_map(|&c| train[c].labels.iter().map(|&l| l as f64))
                .collect();
            let targets = Tensor::from_vec(&[chunk.len(), n_labels], targets)?;
            let mut g = Graph::new();
            let seq = feature_sequence(&mut g, &seqs)?;
            let logits = model.head_logits(&mut g, store, &seq)?;
            let loss = g.weighted_bce_with_logits(logits, &targets, &pos_weights)?;
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                let mut meta = CheckpointMeta::new(ModelKind::Downstream, model.encoder().config().clone());
                meta.downstream = Some(model.config().clone());
                return Err(diagnostic_abort(
                    cfg.diagnostic_dir.as_ref(),
                    meta,
                    store,
                    format!("downstream loss at epoch {epoch}, batch {bi}"),
                ));
            }
            let grads = g.backward(loss)?;
            opt.step(store, &grads)?;
            loss_sum += lv * chunk.len() as f64;
        }
        let mut rec = EpochRecord {
            epoch,
            lr: opt.lr,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: None,
            val_loss: None,
            val_accuracy: None,
            val_auc: Vec::new(),
            val_label_accuracy: Vec::new(),
            seconds: 0.0,
        };
        if !valid.is_empty() {
            let recs = predict_cached(
                model,
                store,
                valid,
                &valid_feats,
                cfg.eval_frames,
                cfg.eval_repeats,
                cfg.seed ^ VAL_STREAM,
            )?;
            let mut vl = 0.0;
            for r in &recs {
                vl += weighted_bce(&r.probs, &r.labels, &pos_weights)?;
            }
            rec.val_loss = Some(vl / recs.len() as f64);
            for j in 0..n_labels {
                let s: Vec<f64> = recs.iter().map(|r| r.probs[j]).collect();
                let y: Vec<u8> = recs.iter().map(|r| r.labels[j]).collect();
                rec.val_auc.push(auc(&s, &y, j).ok());
                let hit = s.iter().zip(&y).filter(|(p, t)| u8::from(**p >= 0.5) == **t).count();
                rec.val_label_accuracy.push(hit as f64 / s.len() as f64);
            }
            rec.val_accuracy = Some(rec.val_label_accuracy.iter().sum::<f64>() / n_labels as f64);
        }
        rec.seconds = t0.elapsed().as_secs_f64();
        log::info!(
            "downstream epoch {epoch}: loss {:.4} val auc {:?}",
            rec.train_loss,
            rec.val_auc
        );
        log.epochs.push(rec);
    }
    log.best_epoch = log.epochs.last().map(|e| e.epoch);
    log.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(log)
}
