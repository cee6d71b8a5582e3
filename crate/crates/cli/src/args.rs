use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rfdrone_core::signal::ClassificationCase;

#[derive(Debug, Parser)]
#[command(
    name = "rfdrone",
    version,
    about = "Dual-band RF drone detection and identification",
    after_help = "Options can also come from a key=value file given with --config; \
                  keys are long flag names without the leading dashes. Flags on the \
                  command line take precedence."
)]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "RFDRONE_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    /// key=value file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic dual-band segments and their manifest.
    Synth(SynthArgs),
    /// Pair segment files under a directory into a manifest.
    Ingest(IngestArgs),
    /// Mix On-and-connected segments of two drone types into coexistence segments.
    Augment(AugmentArgs),
    /// Write feature maps (CSV + graymap) or PSD vectors for each segment.
    Featurize(FeaturizeArgs),
    /// Train and test a classifier over repeated seeded splits.
    Train(TrainArgs),
    /// Evaluate a checkpoint on every in-case segment of a dataset.
    Eval(EvalArgs),
    /// Classify segments with a checkpoint.
    Predict(PredictArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Augment(_) => "augment",
            Command::Featurize(_) => "featurize",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Predict(_) => "predict",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureKind {
    Stft,
    Scu,
    Psd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    ResnetStft,
    #[value(name = "psd-1d")]
    Psd1d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Paper,
    Tiny,
}

/// Where `batch-size`, `epochs`, `lr`, `l2` and `repeats` default from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Budget for the desk-scale synthetic set.
    Desk,
    /// Reference-scale settings for the chosen case.
    Paper,
}

fn parse_case(s: &str) -> Result<ClassificationCase, String> {
    s.parse().map_err(|e: rfdrone_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `table1`, `ii-c`, `ii-c:<per class>` or `<bui>=<n>,...`.
    #[arg(long, default_value = "ii-c")]
    pub counts: String,
    /// Samples per band.
    #[arg(long, default_value_t = 1_000_000)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory searched recursively for `<BUI><L|H>_<index>.csv` files.
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Segments read from a manifest file or a scanned directory.
#[derive(Debug, Args)]
pub struct FileSource {
    /// Manifest CSV with header `low_path,high_path,bui`.
    #[arg(long, conflicts_with = "data_dir")]
    pub manifest: Option<PathBuf>,
    /// Directory searched recursively for segment files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

/// File segments, or synthetic segments generated on the fly.
#[derive(Debug, Args)]
pub struct DataSource {
    #[command(flatten)]
    pub files: FileSource,
    /// Generate segments instead of reading files; same syntax as `synth --counts`.
    #[arg(long, conflicts_with_all = ["manifest", "data_dir"])]
    pub synth: Option<String>,
    /// Samples per band of generated segments.
    #[arg(long, default_value_t = 1_000_000)]
    pub synth_length: usize,
    #[arg(long, default_value_t = 2024)]
    pub synth_seed: u64,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub source: FileSource,
    /// Coexistence codes to generate (`20000,20100,21000`) or `all`.
    #[arg(long, default_value = "all")]
    pub pairs: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// STFT window length; derived from the segment length when omitted.
    #[arg(long, requires = "overlap")]
    pub window_len: Option<usize>,
    /// STFT window overlap in samples.
    #[arg(long, requires = "window_len")]
    pub overlap: Option<usize>,
    /// FFT points (128 for maps; any power of two for PSD).
    #[arg(long, default_value_t = 128)]
    pub nfft: usize,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long, value_enum, default_value_t = FeatureKind::Stft)]
    pub method: FeatureKind,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub source: FileSource,
    /// Low-band file of a single segment (with --high).
    #[arg(long, requires = "high", conflicts_with_all = ["manifest", "data_dir"])]
    pub low: Option<PathBuf>,
    #[arg(long, requires = "low")]
    pub high: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_case, default_value = "II-C")]
    pub case: ClassificationCase,
    #[arg(long, value_enum, default_value_t = ModelArg::ResnetStft)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = ProfileArg::Tiny)]
    pub profile: ProfileArg,
    /// Input features; `stft` for resnet-stft and `psd` for psd-1d when omitted.
    #[arg(long, value_enum)]
    pub features: Option<FeatureKind>,
    #[command(flatten)]
    pub feature_args: FeatureArgs,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Base seed; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[command(flatten)]
    pub data: DataSource,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Must match the checkpoint's case when given.
    #[arg(long, value_parser = parse_case)]
    pub case: Option<ClassificationCase>,
    #[command(flatten)]
    pub data: DataSource,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub source: FileSource,
    #[arg(long, requires = "high", conflicts_with_all = ["manifest", "data_dir"])]
    pub low: Option<PathBuf>,
    #[arg(long, requires = "low")]
    pub high: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}
