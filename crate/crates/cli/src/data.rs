use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use skid_core::arrangements::ArrangementSet;
use skid_core::datakit::{
    clip_path, generate_synthetic_dataset, import_image_dir, labels_path, read_labels, save_clip, write_labels,
    DatasetManifest, LabelSchema, Split, SyntheticSpec, IMPORT_SIDE,
};
use skid_core::framekit::{AugmentationSpec, JigsawPipeline, PipelineMode, Raster, PATCH_SIDE};
use skid_core::rng::stream_rng;
use skid_core::{Plane, Result, SkidError};

use crate::{Globals, PlaneArg, SchemaArg, SplitArg};

pub fn gen_arrangements(n: usize, k: usize, seed: u64, out: &Path) -> Result<()> {
    let set = ArrangementSet::generate(n, k, seed)?;
    set.save(out)?;
    log::info!("wrote {} arrangements of {n} patches to {}", set.len(), out.display());
    Ok(())
}

/// Arrangement set from a file, or generated from `k` and the seed.
pub fn arrangement_set(path: Option<&Path>, n: usize, k: usize, seed: u64) -> Result<ArrangementSet> {
    match path {
        Some(p) => ArrangementSet::load(p),
        None => ArrangementSet::generate(n, k, seed),
    }
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// Arrangement file; generated from --k when absent.
    #[arg(long)]
    arrangements: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    #[arg(long, value_enum, default_value = "sagittal")]
    plane: PlaneArg,
    #[arg(long, value_enum, default_value = "mrnet3")]
    schema: SchemaArg,
    #[arg(long, default_value_t = 8)]
    count: usize,
    /// Use the validation path (no augmentation, centre crops).
    #[arg(long)]
    validation: bool,
    #[arg(long)]
    out: PathBuf,
}

fn tile(patches: &[Raster]) -> Raster {
    let grid = (patches.len() as f64).sqrt().round() as usize;
    let gap = 4;
    let side = grid * PATCH_SIDE + (grid - 1) * gap;
    let mut out = Raster::filled(side, side, 1.0);
    for (i, p) in patches.iter().enumerate() {
        let (r0, c0) = ((i / grid) * (PATCH_SIDE + gap), (i % grid) * (PATCH_SIDE + gap));
        for y in 0..p.height() {
            for x in 0..p.width() {
                out.set(r0 + y, c0 + x, p.get(y, x));
            }
        }
    }
    out
}

pub fn dump_samples(g: &Globals, a: DumpArgs) -> Result<()> {
    let seed = g.seed_or(0);
    let plane: Plane = a.plane.into();
    let m = DatasetManifest::load(g.root()?, a.split.into(), a.schema.into(), &[plane])?;
    if m.is_empty() {
        return Err(SkidError::Data("no clips in the split".into()));
    }
    let set = arrangement_set(a.arrangements.as_deref(), 9, a.k, seed)?;
    let n = set.n_patches();
    let pipe = JigsawPipeline::new(set, n, AugmentationSpec::default())?;
    let mode = if a.validation {
        PipelineMode::Validation
    } else {
        PipelineMode::Train
    };
    std::fs::create_dir_all(&a.out)?;
    let mut index = String::from("file,clip_id,frame,label,arrangement\n");
    for i in 0..a.count {
        let mut rng = stream_rng(seed, i as u64);
        let clip = m.load_volume(i % m.len(), plane)?;
        let f = rand::Rng::random_range(&mut rng, 0..clip.n_frames());
        let s = pipe.sample(&clip.frame(f)?, mode, &mut rng)?;
        let name = format!("sample_{i:03}_label_{}.png", s.label);
        tile(&s.patches).save_png(a.out.join(&name))?;
        let perm = pipe.aset().get(s.label).expect("label from the set").perm();
        let perm: Vec<String> = perm.iter().map(|p| p.to_string()).collect();
        writeln!(index, "{name},{},{f},{},{}", clip.clip_id, s.label, perm.join(" ")).expect("string write");
    }
    std::fs::write(a.out.join("samples.csv"), index)?;
    log::info!("wrote {} samples to {}", a.count, a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output root; defaults to the dataset root.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Size relative to the 1130-clip training split.
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    #[arg(long)]
    n_valid: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long, default_value_t = 256)]
    side: usize,
    #[arg(long)]
    min_frames: Option<usize>,
    #[arg(long)]
    max_frames: Option<usize>,
    /// Planes to write (default: all three).
    #[arg(long, value_enum, value_delimiter = ',')]
    planes: Vec<PlaneArg>,
}

pub fn synth(g: &Globals, a: SynthArgs) -> Result<()> {
    let root = match a.out {
        Some(p) => p,
        None => g.root()?,
    };
    let mut spec = SyntheticSpec::mrnet_scaled(a.scale);
    spec.frame_side = a.side;
    spec.seed = g.seed_or(spec.seed);
    if let Some(v) = a.n_valid {
        spec.n_valid = v;
    }
    if let Some(v) = a.n_test {
        spec.n_test = v;
    }
    if let Some(v) = a.min_frames {
        spec.min_frames = v;
    }
    if let Some(v) = a.max_frames {
        spec.max_frames = v;
    }
    if !a.planes.is_empty() {
        spec.planes = a.planes.into_iter().map(Plane::from).collect();
    }
    let summary = generate_synthetic_dataset(&spec, &root)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "mrnet3")]
    schema: SchemaArg,
    #[arg(long, value_enum, value_delimiter = ',')]
    planes: Vec<PlaneArg>,
}

pub fn validate(g: &Globals, a: ValidateArgs) -> Result<()> {
    let root = g.root()?;
    let schema: LabelSchema = a.schema.into();
    let planes: Vec<Plane> = if a.planes.is_empty() {
        Plane::ALL.to_vec()
    } else {
        a.planes.into_iter().map(Plane::from).collect()
    };
    let mut found = 0;
    for split in [Split::Train, Split::Valid, Split::Test] {
        if !labels_path(&root, split).exists() {
            continue;
        }
        let m = DatasetManifest::load(&root, split, schema, &planes)?;
        found += 1;
        println!("{}: {} clips, positives per label {:?}", split.as_str(), m.len(), m.positives());
    }
    if found == 0 {
        return Err(SkidError::Data(format!("no labels files under {}", root.display())));
    }
    println!("ok");
    Ok(())
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Directory of per-frame PNG files, ordered by file name.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    clip_id: String,
    #[arg(long, value_enum)]
    plane: PlaneArg,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    #[arg(long, default_value_t = IMPORT_SIDE)]
    side: usize,
    /// Comma-separated labels to record for the clip, e.g. `1,0,1`.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<u8>,
    #[arg(long, value_enum, default_value = "mrnet3")]
    schema: SchemaArg,
}

pub fn import(g: &Globals, a: ImportArgs) -> Result<()> {
    let root = g.root()?;
    let plane: Plane = a.plane.into();
    let split: Split = a.split.into();
    let clip = import_image_dir(&a.dir, &a.clip_id, plane, a.side)?;
    let out = clip_path(&root, split, plane, &a.clip_id);
    save_clip(&clip, &out)?;
    log::info!("wrote {} frames to {}", clip.n_frames(), out.display());
    if !a.labels.is_empty() {
        let schema: LabelSchema = a.schema.into();
        let path = labels_path(&root, split);
        let mut rows = if path.exists() {
            read_labels(&path, schema)?
        } else {
            Vec::new()
        };
        match rows.iter_mut().find(|(id, _)| *id == a.clip_id) {
            Some(row) => row.1 = a.labels.clone(),
            None => rows.push((a.clip_id.clone(), a.labels.clone())),
        }
        rows.sort_by(|x, y| x.0.cmp(&y.0));
        write_labels(&path, schema, &rows)?;
    }
    Ok(())
}
