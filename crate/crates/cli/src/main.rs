use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use skid_core::datakit::{LabelSchema, Split};
use skid_core::skidnet::{BlockId, HeadKind, SkidConfig};
use skid_core::Plane;

mod data;
mod eval;
mod train;

/// Jigsaw-pretext pretraining and frozen-encoder knee MRI classification.
#[derive(Debug, Parser)]
#[command(name = "skid", version)]
struct Cli {
    /// Seed for every random choice; overrides the seed in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Dataset root (falls back to $SKID_DATA_ROOT).
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a maximal-Hamming arrangement set.
    GenArrangements {
        #[arg(long, default_value_t = 9)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write jumbled patch grids as PNGs for visual inspection.
    DumpSamples(data::DumpArgs),
    /// Train the encoder on the jigsaw task.
    PretextTrain(train::PretextArgs),
    /// Train a temporal head on a frozen pretrained encoder.
    DownstreamTrain(train::DownstreamArgs),
    /// Train the encoder on 54-way geometric-transformation prediction.
    GeoTrain(train::GeoArgs),
    /// Predict one split with a downstream checkpoint and report metrics.
    Evaluate(eval::EvaluateArgs),
    /// Combine per-plane predictions with log-odds voting.
    Ensemble(eval::EnsembleArgs),
    /// Grad-CAM overlays for the frames of one clip.
    Gradcam(eval::GradcamArgs),
    /// Generate a synthetic planted-motif dataset.
    SynthData(data::SynthArgs),
    /// Check every clip header and label file under the dataset root.
    ValidateData(data::ValidateArgs),
    /// Convert a directory of PNG frames into a clip volume.
    Import(data::ImportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    V1,
    V2,
    V3,
    Noblocks,
    Miniature,
}

impl VariantArg {
    pub fn config(self) -> SkidConfig {
        match self {
            VariantArg::V1 => SkidConfig::v1(),
            VariantArg::V2 => SkidConfig::v2(),
            VariantArg::V3 => SkidConfig::v3(),
            VariantArg::Noblocks => SkidConfig::noblocks(),
            VariantArg::Miniature => SkidConfig::miniature(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlaneArg {
    Sagittal,
    Coronal,
    Axial,
}

impl From<PlaneArg> for Plane {
    fn from(p: PlaneArg) -> Plane {
        match p {
            PlaneArg::Sagittal => Plane::Sagittal,
            PlaneArg::Coronal => Plane::Coronal,
            PlaneArg::Axial => Plane::Axial,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemaArg {
    Mrnet3,
    KneemriBinary,
    KneemriTernary,
}

impl From<SchemaArg> for LabelSchema {
    fn from(s: SchemaArg) -> LabelSchema {
        match s {
            SchemaArg::Mrnet3 => LabelSchema::Mrnet3,
            SchemaArg::KneemriBinary => LabelSchema::KneemriBinary,
            SchemaArg::KneemriTernary => LabelSchema::KneemriTernary,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HeadArg {
    Convlstm,
    Cnn3d,
}

impl From<HeadArg> for HeadKind {
    fn from(h: HeadArg) -> HeadKind {
        match h {
            HeadArg::Convlstm => HeadKind::ConvLstm,
            HeadArg::Cnn3d => HeadKind::Cnn3d,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassArg {
    Abn,
    Acl,
    Men,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayerArg {
    Concat,
    Trunk,
    Skip1,
    Dimred1,
    Skip2,
    Dimred2,
}

impl From<LayerArg> for BlockId {
    fn from(l: LayerArg) -> BlockId {
        match l {
            LayerArg::Concat => BlockId::Concat,
            LayerArg::Trunk => BlockId::Trunk,
            LayerArg::Skip1 => BlockId::Skip1,
            LayerArg::Dimred1 => BlockId::DimRed1,
            LayerArg::Skip2 => BlockId::Skip2,
            LayerArg::Dimred2 => BlockId::DimRed2,
        }
    }
}

pub struct Globals {
    pub seed: Option<u64>,
    pub data_root: Option<PathBuf>,
}

impl Globals {
    pub fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }

    pub fn root(&self) -> skid_core::Result<PathBuf> {
        skid_core::datakit::resolve_data_root(self.data_root.as_deref())
    }
}

fn run(cli: Cli) -> skid_core::Result<()> {
    let g = Globals {
        seed: cli.seed,
        data_root: cli.data_root,
    };
    match cli.command {
        Command::GenArrangements { n, k, out } => data::gen_arrangements(n, k, g.seed_or(0), &out),
        Command::DumpSamples(a) => data::dump_samples(&g, a),
        Command::PretextTrain(a) => train::pretext(&g, a),
        Command::DownstreamTrain(a) => train::downstream(&g, a),
        Command::GeoTrain(a) => train::geo(&g, a),
        Command::Evaluate(a) => eval::evaluate(&g, a),
        Command::Ensemble(a) => eval::ensemble(&g, a),
        Command::Gradcam(a) => eval::gradcam(&g, a),
        Command::SynthData(a) => data::synth(&g, a),
        Command::ValidateData(a) => data::validate(&g, a),
        Command::Import(a) => data::import(&g, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
