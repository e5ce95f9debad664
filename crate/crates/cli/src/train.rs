use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use skid_autograd::ParamStore;
use skid_core::datakit::{
    oversample_minority, subset_for_label_efficiency, ClipVolume, DatasetManifest, LabelSchema, Split,
};
use skid_core::framekit::{AugmentationSpec, JigsawPipeline, GEO_CLASSES};
use skid_core::rng::seeded;
use skid_core::skidnet::{
    copy_params, Checkpoint, CheckpointMeta, DownstreamConfig, DownstreamModel, ModelKind, PretextModel,
};
use skid_core::trainkit::{
    encode_clips, predict_cached, train_downstream, train_geo_baseline, train_pretext, DownstreamTrainConfig,
    PretextTrainConfig, TrainLog,
};
use skid_core::evalkit::write_records;
use skid_core::{Plane, Result, SkidError};

use crate::data::arrangement_set;
use crate::{Globals, HeadArg, PlaneArg, SchemaArg, VariantArg};

/// JSON config for `pretext-train` and `geo-train`; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PretextJob {
    pub train: PretextTrainConfig,
    pub augmentation: AugmentationSpec,
}

/// JSON config for `downstream-train`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DownstreamJob {
    pub train: DownstreamTrainConfig,
    /// Head layout; defaults to the full-width head.
    pub model: Option<DownstreamConfig>,
}

fn read_config<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(T::default()),
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sagittal")]
    plane: PlaneArg,
    #[arg(long, value_enum, default_value = "mrnet3")]
    schema: SchemaArg,
    /// Override the epoch count from the config.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the initial learning rate from the config.
    #[arg(long)]
    lr: Option<f64>,
    /// Output directory for the checkpoint and logs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PretextArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Arrangement file; generated from --k and the seed when absent.
    #[arg(long)]
    arrangements: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long, value_enum, default_value = "v3")]
    variant: VariantArg,
}

#[derive(Debug, Args)]
pub struct GeoArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "v3")]
    variant: VariantArg,
}

#[derive(Debug, Args)]
pub struct DownstreamArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Pretext or geometric checkpoint whose encoder is reused.
    #[arg(long)]
    pretext: PathBuf,
    #[arg(long, value_enum)]
    head: Option<HeadArg>,
    /// Hidden channels of the temporal head (overrides the config).
    #[arg(long)]
    head_channels: Option<usize>,
    /// Train on a stratified fraction of the training clips.
    #[arg(long, default_value_t = 1.0)]
    label_fraction: f64,
    /// Duplicate minority-class clips (binary schemas).
    #[arg(long)]
    oversample: bool,
}

fn load_split(root: &Path, split: Split, schema: LabelSchema, plane: Plane) -> Result<Vec<ClipVolume>> {
    DatasetManifest::load(root, split, schema, &[plane])?.load_all(plane)
}

fn optional_split(root: &Path, split: Split, schema: LabelSchema, plane: Plane) -> Result<Vec<ClipVolume>> {
    if skid_core::datakit::labels_path(root, split).exists() {
        load_split(root, split, schema, plane)
    } else {
        log::warn!("no {} split; training without validation", split.as_str());
        Ok(Vec::new())
    }
}

fn save_outputs(out: &Path, stem: &str, ckpt: Checkpoint, log: &TrainLog) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{stem}.ckpt"));
    ckpt.save(&path)?;
    log.save(out, stem)?;
    log::info!("saved {} and {stem}.csv/.json", path.display());
    Ok(path)
}

fn pretext_config(g: &Globals, c: &CommonArgs) -> Result<PretextJob> {
    let mut job: PretextJob = read_config(c.config.as_deref())?;
    job.train.seed = g.seed_or(job.train.seed);
    if let Some(e) = c.epochs {
        job.train.max_epochs = e;
    }
    if let Some(lr) = c.lr {
        job.train.lr = lr;
    }
    Ok(job)
}

pub fn pretext(g: &Globals, a: PretextArgs) -> Result<()> {
    let job = pretext_config(g, &a.common)?;
    let root = g.root()?;
    let plane: Plane = a.common.plane.into();
    let schema: LabelSchema = a.common.schema.into();
    let train = load_split(&root, Split::Train, schema, plane)?;
    let valid = optional_split(&root, Split::Valid, schema, plane)?;

    let skid = a.variant.config();
    let set = arrangement_set(a.arrangements.as_deref(), skid.n_patches, a.k, job.train.seed)?;
    let skid = skid.with_classes(set.len());
    let arrangement_seed = set.seed();
    std::fs::create_dir_all(&a.common.out)?;
    set.save(a.common.out.join("arrangements.txt"))?;
    let pipe = JigsawPipeline::new(set, skid.n_patches, job.augmentation.clone())?;

    let mut store = ParamStore::new();
    let model = PretextModel::build(&skid, &mut store, &mut seeded(job.train.seed))?;
    let log = train_pretext(&train, &valid, &pipe, &model, &mut store, &job.train)?;

    let mut meta = CheckpointMeta::new(ModelKind::Pretext, skid);
    meta.plane = Some(plane);
    meta.arrangement_seed = Some(arrangement_seed);
    save_outputs(&a.common.out, "pretext", Checkpoint::new(meta, store), &log)?;
    Ok(())
}

pub fn geo(g: &Globals, a: GeoArgs) -> Result<()> {
    let job = pretext_config(g, &a.common)?;
    let root = g.root()?;
    let plane: Plane = a.common.plane.into();
    let schema: LabelSchema = a.common.schema.into();
    let train = load_split(&root, Split::Train, schema, plane)?;
    let valid = optional_split(&root, Split::Valid, schema, plane)?;

    let skid = a.variant.config().with_classes(GEO_CLASSES);
    let mut store = ParamStore::new();
    let model = PretextModel::build(&skid, &mut store, &mut seeded(job.train.seed))?;
    let log = train_geo_baseline(&train, &valid, &model, &mut store, &job.train)?;

    let mut meta = CheckpointMeta::new(ModelKind::Geo, skid);
    meta.plane = Some(plane);
    save_outputs(&a.common.out, "geo", Checkpoint::new(meta, store), &log)?;
    Ok(())
}

pub fn downstream(g: &Globals, a: DownstreamArgs) -> Result<()> {
    let mut job: DownstreamJob = read_config(a.common.config.as_deref())?;
    job.train.seed = g.seed_or(job.train.seed);
    if let Some(e) = a.common.epochs {
        job.train.max_epochs = e;
    }
    if let Some(lr) = a.common.lr {
        job.train.lr = lr;
    }
    let mut dcfg = job.model.clone().unwrap_or_default();
    if let Some(h) = a.head {
        dcfg.head = h.into();
    }
    if let Some(c) = a.head_channels {
        dcfg.convlstm_channels = c;
        dcfg.cnn3d_channels = c;
    }

    let root = g.root()?;
    let plane: Plane = a.common.plane.into();
    let schema: LabelSchema = a.common.schema.into();
    dcfg.n_labels = schema.n_labels();
    let mut manifest = DatasetManifest::load(&root, Split::Train, schema, &[plane])?;
    if a.label_fraction < 1.0 {
        manifest = subset_for_label_efficiency(&manifest, a.label_fraction, job.train.seed)?;
        log::info!("label-efficiency subset: {} clips", manifest.len());
    }
    if a.oversample {
        manifest = oversample_minority(&manifest)?;
    }
    let train = manifest.load_all(plane)?;
    let valid = optional_split(&root, Split::Valid, schema, plane)?;

    let pre = Checkpoint::load(&a.pretext)?;
    if pre.meta.kind == ModelKind::Downstream {
        return Err(SkidError::InvalidArgument(format!(
            "{} is a downstream checkpoint; pass a pretext or geo checkpoint",
            a.pretext.display()
        )));
    }
    let mut store = ParamStore::new();
    let model = DownstreamModel::build(&pre.meta.encoder, &dcfg, &mut store, &mut seeded(job.train.seed))?;
    let copied = copy_params(&mut store, &pre.params, "enc.")?;
    log::info!("loaded {copied} encoder tensors from {}", a.pretext.display());
    let log = train_downstream(&train, &valid, &model, &mut store, &job.train)?;

    let stem = format!("downstream_{}", plane.as_str());
    if !valid.is_empty() {
        let feats = encode_clips(&model, &store, &valid)?;
        let recs = predict_cached(
            &model,
            &store,
            &valid,
            &feats,
            job.train.eval_frames,
            job.train.eval_repeats,
            job.train.seed,
        )?;
        std::fs::create_dir_all(&a.common.out)?;
        write_records(a.common.out.join(format!("valid_{}.csv", plane.as_str())), &recs)?;
    }
    let mut meta = CheckpointMeta::new(ModelKind::Downstream, pre.meta.encoder.clone());
    meta.downstream = Some(dcfg);
    meta.plane = Some(plane);
    meta.arrangement_seed = pre.meta.arrangement_seed;
    save_outputs(&a.common.out, &stem, Checkpoint::new(meta, store), &log)?;
    Ok(())
}
