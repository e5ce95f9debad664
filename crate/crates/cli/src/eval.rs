use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use skid_core::datakit::{load_clip, DatasetManifest, LabelSchema};
use skid_core::evalkit::{
    clamp_accuracy, class_accuracies, compute_weights, ensemble_predict, metrics_report, read_records,
    records_report, write_records, EnsembleWeights, PredictionRecord,
};
use skid_core::interpret::{gradcam_clip, gradcam_frame, render_overlays, SaliencyMap};
use skid_core::skidnet::{BlockId, Checkpoint, ModelKind};
use skid_core::trainkit::{encode_clips, predict_cached};
use skid_core::{Plane, Result, SkidError, LABEL_NAMES};

use crate::{ClassArg, Globals, LayerArg, PlaneArg, SchemaArg, SplitArg};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Downstream checkpoint.
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Plane to read; defaults to the plane recorded in the checkpoint.
    #[arg(long, value_enum)]
    plane: Option<PlaneArg>,
    #[arg(long, value_enum, default_value = "mrnet3")]
    schema: SchemaArg,
    #[arg(long, default_value_t = 16)]
    frames: usize,
    #[arg(long, default_value_t = 8)]
    repeats: usize,
    #[arg(long, default_value_t = 1000)]
    n_boot: usize,
    /// Prediction CSV to write.
    #[arg(long)]
    preds: PathBuf,
    /// Metrics JSON to write.
    #[arg(long)]
    metrics: PathBuf,
}

pub fn evaluate(g: &Globals, a: EvaluateArgs) -> Result<()> {
    let seed = g.seed_or(0);
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let (model, store) = ckpt.downstream_model()?;
    let plane: Plane = match (a.plane, ckpt.meta.plane) {
        (Some(p), _) => p.into(),
        (None, Some(p)) => p,
        (None, None) => return Err(SkidError::InvalidArgument("checkpoint records no plane; pass --plane".into())),
    };
    let schema: LabelSchema = a.schema.into();
    let clips = DatasetManifest::load(g.root()?, a.split.into(), schema, &[plane])?.load_all(plane)?;
    let feats = encode_clips(&model, &store, &clips)?;
    let recs = predict_cached(&model, &store, &clips, &feats, a.frames, a.repeats, seed)?;
    write_records(&a.preds, &recs)?;
    let report = records_report(&format!("{} {}", a.ckpt.display(), plane.as_str()), &recs, a.n_boot, seed)?;
    report.save(&a.metrics)?;
    for c in &report.classes {
        log::info!("{}: auc {:?}", c.name, c.auc);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Per-plane prediction CSVs to combine (one per plane).
    #[arg(long, num_args = 1.., required = true)]
    preds: Vec<PathBuf>,
    /// Per-plane validation prediction CSVs that set the voting weights.
    #[arg(long, num_args = 1.., conflicts_with = "uniform")]
    weights_from: Vec<PathBuf>,
    /// Equal voting weights.
    #[arg(long)]
    uniform: bool,
    #[arg(long, default_value_t = 1000)]
    n_boot: usize,
    /// Ensemble score CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Metrics JSON to write (weights are echoed next to it).
    #[arg(long)]
    metrics: PathBuf,
}

fn records_by_plane(paths: &[PathBuf]) -> Result<BTreeMap<Plane, Vec<PredictionRecord>>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let recs = read_records(p)?;
        let plane = recs
            .first()
            .map(|r| r.plane)
            .ok_or_else(|| SkidError::Data(format!("{} has no records", p.display())))?;
        if recs.iter().any(|r| r.plane != plane) {
            return Err(SkidError::Data(format!("{} mixes planes", p.display())));
        }
        if out.insert(plane, recs).is_some() {
            return Err(SkidError::InvalidArgument(format!("plane {} given twice", plane.as_str())));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct EnsembleSummary<'a> {
    weights: &'a EnsembleWeights,
    validation_accuracy: BTreeMap<String, Vec<f64>>,
}

pub fn ensemble(g: &Globals, a: EnsembleArgs) -> Result<()> {
    let seed = g.seed_or(0);
    let test = records_by_plane(&a.preds)?;
    let planes: Vec<Plane> = test.keys().copied().collect();
    let mut val_acc = BTreeMap::new();
    let weights = if a.uniform || a.weights_from.is_empty() {
        EnsembleWeights::uniform(&planes, LABEL_NAMES.len())
    } else {
        let valid = records_by_plane(&a.weights_from)?;
        let mut acc = vec![Vec::with_capacity(planes.len()); LABEL_NAMES.len()];
        for p in &planes {
            let recs = valid
                .get(p)
                .ok_or_else(|| SkidError::InvalidArgument(format!("no validation records for plane {}", p.as_str())))?;
            let a: Vec<f64> = class_accuracies(recs).into_iter().map(|v| clamp_accuracy(v, recs.len())).collect();
            for (j, v) in a.iter().enumerate() {
                acc[j].push(*v);
            }
            val_acc.insert(p.as_str().to_string(), a);
        }
        compute_weights(&planes, &acc)?
    };

    let first = &test[&planes[0]];
    let mut scores = Vec::with_capacity(first.len());
    let mut labels = Vec::with_capacity(first.len());
    let mut csv = String::from("clip_id,s_abn,s_acl,s_men,d_abn,d_acl,d_men,y_abn,y_acl,y_men\n");
    for r0 in first {
        let mut per_clip = Vec::with_capacity(planes.len());
        for p in &planes {
            let r = test[p].iter().find(|r| r.clip_id == r0.clip_id).ok_or_else(|| {
                SkidError::Data(format!("clip {} missing from the {} predictions", r0.clip_id, p.as_str()))
            })?;
            if r.labels != r0.labels {
                return Err(SkidError::Data(format!("clip {} has conflicting labels across planes", r0.clip_id)));
            }
            per_clip.push(r);
        }
        let out = ensemble_predict(&per_clip, &weights)?;
        let join = |v: &[String]| v.join(",");
        let s: Vec<String> = out.scores.iter().map(|v| v.to_string()).collect();
        let d: Vec<String> = out.bits.iter().map(|v| v.to_string()).collect();
        let y: Vec<String> = r0.labels.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{},{},{},{}", r0.clip_id, join(&s), join(&d), join(&y)).expect("string write");
        scores.push(out.scores);
        labels.push(r0.labels.clone());
    }
    std::fs::write(&a.out, csv)?;
    let report = metrics_report("ensemble", &LABEL_NAMES, &scores, &labels, a.n_boot, (0.05, 0.95), seed)?;
    report.save(&a.metrics)?;
    let summary = EnsembleSummary {
        weights: &weights,
        validation_accuracy: val_acc,
    };
    std::fs::write(a.metrics.with_extension("weights.json"), serde_json::to_vec_pretty(&summary)?)?;
    for c in &report.classes {
        log::info!("{}: auc {:?}", c.name, c.auc);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradcamArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Clip volume (SKIDVOL file).
    #[arg(long)]
    clip: PathBuf,
    /// Target label for a downstream checkpoint.
    #[arg(long, value_enum)]
    class: Option<ClassArg>,
    /// Target class index for a pretext or geometric checkpoint.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, value_enum, default_value = "dimred2")]
    layer: LayerArg,
    /// Number of evenly spaced frames to explain.
    #[arg(long, default_value_t = 16)]
    frames: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct MapSummary {
    file: String,
    frame: usize,
    all_zero: bool,
}

pub fn gradcam(_g: &Globals, a: GradcamArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let clip = load_clip(&a.clip)?;
    let n = clip.n_frames();
    let count = a.frames.clamp(1, n);
    let idx: Vec<usize> = (0..count).map(|i| (2 * i + 1) * n / (2 * count)).collect();
    let frames = idx.iter().map(|&i| clip.frame(i)).collect::<Result<Vec<_>>>()?;
    let layer: BlockId = a.layer.into();

    let (maps, stem): (Vec<SaliencyMap>, String) = if ckpt.meta.kind == ModelKind::Downstream {
        let class = a
            .class
            .ok_or_else(|| SkidError::InvalidArgument("--class is required for a downstream checkpoint".into()))?;
        let (target, stem) = match class {
            ClassArg::Abn => (0, "abn"),
            ClassArg::Acl => (1, "acl"),
            ClassArg::Men => (2, "men"),
        };
        let (model, store) = ckpt.downstream_model()?;
        (gradcam_clip(&model, &store, &frames, target, layer)?, stem.to_string())
    } else {
        let target = a
            .target
            .ok_or_else(|| SkidError::InvalidArgument("--target is required for a pretext or geo checkpoint".into()))?;
        let (model, store) = ckpt.pretext_model()?;
        let maps = frames
            .iter()
            .map(|f| gradcam_frame(&model, &store, f, target, layer))
            .collect::<Result<Vec<_>>>()?;
        (maps, format!("class{target}"))
    };
    let paths = render_overlays(&maps, &frames, &a.out, &stem)?;
    let summary: Vec<MapSummary> = paths
        .iter()
        .zip(&idx)
        .zip(&maps)
        .map(|((p, &frame), m)| MapSummary {
            file: p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            frame,
            all_zero: m.all_zero,
        })
        .collect();
    std::fs::write(a.out.join(format!("{stem}.json")), serde_json::to_vec_pretty(&summary)?)?;
    log::info!("wrote {} overlays to {}", paths.len(), a.out.display());
    Ok(())
}
