//! Command-line front end for `lowband-core`.
//!
//! Every command is deterministic given its flags; JSON output embeds the
//! resolved configuration, and commands that write files also drop a
//! `*_config.json` next to them.
//!
//! Exit codes: 0 success, 1 I/O, 2 validation, 3 numerical failure.

mod commands;
mod error;
mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "lowband", version, about = "Compression and prioritized delivery experiments for low-bandwidth imagery")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed for every randomized step (corpus, split, init, shuffles)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for written artifacts
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Format of the main stdout report
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Quality report (MSE, PSNR, SSIM, sizes) between two PNM images
    Metrics(MetricsArgs),
    /// Encode, decode or rate-distortion sweep with a single codec
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Block-count ablation producing a quality and compression CSV
    Ablate(AblateArgs),
    /// Train one autoencoder and save a checkpoint
    Train(TrainArgs),
    /// Crop annotated detections into lossless cutout payloads
    Cutout(CutoutArgs),
    /// Template caption from annotations
    Caption(CaptionArgs),
    /// Simulate delivery of a payload list over a link
    Simulate(SimulateArgs),
    /// Build every payload for one image, plan and simulate delivery
    Pipeline(PipelineArgs),
    /// Compare all methods by size and quality, including AE vs DCT at a matched ratio
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Reference image
    pub reference: PathBuf,
    /// Image to compare against the reference
    pub candidate: PathBuf,
    #[arg(long, default_value_t = 255.0)]
    pub psnr_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CodecArg {
    Huffman,
    Predictive,
    Dct,
    Ae,
}

#[derive(Subcommand, Debug)]
pub enum CodecCommand {
    /// PNM in, blob out
    Encode {
        #[arg(long, value_enum)]
        codec: CodecArg,
        /// DCT quality, 1-100
        #[arg(long, default_value_t = 75)]
        quality: u8,
        /// Autoencoder checkpoint, required for `--codec ae`
        #[arg(long)]
        model: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Blob in, PNM out
    Decode {
        #[arg(long)]
        model: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// DCT rate-distortion sweep
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [5u8, 10, 25, 50, 75, 90, 95, 100])]
        qualities: Vec<u8>,
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SkipArg {
    Paper,
    CodecHonest,
}

#[derive(Args, Debug, Clone)]
pub struct DatasetArgs {
    /// Generate this many synthetic scenes
    #[arg(long, conflicts_with = "dataset_dir")]
    pub synthetic: Option<usize>,
    /// Directory of .pgm/.ppm/.pnm images
    #[arg(long)]
    pub dataset_dir: Option<PathBuf>,
    /// Channels of synthetic scenes
    #[arg(long, default_value_t = 3)]
    pub channels: u8,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Square side images are resized to
    #[arg(long, default_value_t = 256)]
    pub input_side: u32,
    #[arg(long, default_value_t = 16)]
    pub base_width: u32,
    #[arg(long, value_enum, default_value_t = SkipArg::CodecHonest)]
    pub skip_mode: SkipArg,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 25)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    pub val_split: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 255.0)]
    pub psnr_max: f64,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Block counts to train, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0u32, 1, 2, 3, 4, 5])]
    pub blocks: Vec<u32>,
    /// Only emit architecture columns (output size, compression); no training
    #[arg(long)]
    pub plan_only: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub blocks: u32,
}

#[derive(Args, Debug)]
pub struct CutoutArgs {
    pub image: PathBuf,
    /// JSON-lines annotation file
    pub annotations: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub min_confidence: f64,
    /// Only use annotations with this image id
    #[arg(long)]
    pub image_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct CaptionArgs {
    pub annotations: PathBuf,
    #[arg(long)]
    pub image_id: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct LinkArgs {
    /// Link bandwidth in bytes per second
    #[arg(long, default_value_t = 10_000.0)]
    pub bandwidth_bps: f64,
    /// Fixed per-message latency in seconds
    #[arg(long, default_value_t = 0.0)]
    pub latency_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Hierarchical,
    RawFirst,
    AsGiven,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Payload as kind:bytes, e.g. caption:98 (repeatable, order is "as given")
    #[arg(long = "payload")]
    pub payloads: Vec<String>,
    /// Read payload kinds and sizes from a pipeline manifest instead
    #[arg(long, conflicts_with = "payloads")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Hierarchical)]
    pub policy: PolicyArg,
    #[command(flatten)]
    pub link: LinkArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SceneArgs {
    /// Input image; a synthetic scene is generated from --seed when absent
    #[arg(long, requires = "annotations")]
    pub image: Option<PathBuf>,
    /// Annotations for --image
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Side of the synthetic scene
    #[arg(long, default_value_t = 256)]
    pub side: u32,
    /// Objects in the synthetic scene
    #[arg(long, default_value_t = 4)]
    pub objects: usize,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Autoencoder checkpoint; the embedding payload is skipped without it
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// DCT quality of the lossy image payload
    #[arg(long, default_value_t = 75)]
    pub quality: u8,
    #[arg(long, default_value_t = 0.5)]
    pub min_confidence: f64,
    #[command(flatten)]
    pub link: LinkArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Autoencoder checkpoint; without it a model is trained on synthetic scenes
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Scenes used when training the fallback model
    #[arg(long, default_value_t = 60)]
    pub train_synthetic: usize,
    /// Epochs for the fallback model
    #[arg(long, default_value_t = 20)]
    pub train_epochs: usize,
    /// Blocks of the fallback model
    #[arg(long, default_value_t = 1)]
    pub blocks: u32,
    /// DCT qualities listed in the method table
    #[arg(long, value_delimiter = ',', default_values_t = [10u8, 25, 50, 75, 90])]
    pub qualities: Vec<u8>,
    #[arg(long, default_value_t = 255.0)]
    pub psnr_max: f64,
}

/// Runs a parsed command line, printing its report to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let out = commands::dispatch(&cli.global, cli.command)?;
    if !out.is_empty() {
        print!("{out}");
        if !out.ends_with('\n') {
            println!();
        }
    }
    Ok(())
}

/// Runs a command line and returns the stdout text instead of printing it.
pub fn run_to_string<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Validation(e.to_string()))?;
    commands::dispatch(&cli.global, cli.command)
}
