//! The `srunc` command line.
//!
//! Exit codes: 0 on success, 1 when a command fails at run time, 2 for
//! usage and configuration errors. Failures are reported on stderr as a
//! single line starting with `error:`.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use srunc_core::artifacts::{Method, RunConfig};
use srunc_core::uncertainty::StdMode;

pub use commands::Failure;

/// Environment variable naming the directory of pretrained weights.
pub const WEIGHTS_DIR_ENV: &str = "SRUNC_WEIGHTS_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "srunc",
    version,
    about = "GAN super-resolution with MC-dropout and ensemble uncertainty"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured run seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Runs every reduction sequentially and leaves wall-clock times out of
    /// the outputs, so reruns are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Directory holding pretrained feature-extractor weights.
    #[arg(long, global = true, env = WEIGHTS_DIR_ENV, value_name = "DIR")]
    pub weights_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crops and downsamples a folder of images into training pairs.
    Prepare(PrepareArgs),
    /// Trains one generator (and discriminator).
    Train(TrainArgs),
    /// Trains one independent run per ensemble seed.
    TrainEnsemble(TrainArgs),
    /// Super-resolves one image and writes its uncertainty map.
    Infer(InferArgs),
    /// Scores a dataset and bins per-image uncertainty against error.
    Evaluate(EvalArgs),
    /// Sweeps per-pixel uncertainty thresholds against error.
    Calibrate(EvalArgs),
    /// Blends a heat-mapped uncertainty map over a super-resolved image.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Folder of source images.
    #[arg(long)]
    pub input: PathBuf,
    /// Output folder for `manifest.tsv`, `hr/`, `lr/` and `skipped.tsv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    /// Side of the centered high-resolution crop.
    #[arg(long, default_value_t = 256)]
    pub hr_size: usize,
    /// Fraction of images assigned to the test split.
    #[arg(long, default_value_t = 0.0)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest; defaults to `paths.data`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output folder; defaults to `paths.out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Generator checkpoint; repeat for an ensemble.
    #[arg(long = "checkpoint", value_name = "PATH")]
    pub checkpoints: Vec<PathBuf>,
    /// single, mcd, ensemble or identity; defaults to `uncertainty.method`.
    #[arg(long)]
    pub method: Option<Method>,
    /// MC dropout forwards; defaults to `uncertainty.samples`.
    #[arg(long)]
    pub samples: Option<usize>,
    /// paper_eq7 or sample_std; defaults to `uncertainty.mode`.
    #[arg(long)]
    pub mode: Option<StdMode>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Low-resolution input image.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Dataset manifest; defaults to `paths.data`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// train, test or all.
    #[arg(long, default_value = "all")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `evaluation.n_bins`.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Overrides `evaluation.n_thresholds`.
    #[arg(long)]
    pub thresholds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Super-resolved image.
    #[arg(long)]
    pub sr: PathBuf,
    /// Uncertainty sidecar written by `infer`.
    #[arg(long)]
    pub sigma: PathBuf,
    /// Reference image of the same size, shown in the panel.
    #[arg(long)]
    pub original: Option<PathBuf>,
    /// Overlay output (PNG).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional `original | sr | overlay` panel (PNG); needs `--original`.
    #[arg(long)]
    pub panel: Option<PathBuf>,
}

/// Global settings every command sees.
pub struct Context {
    pub config: RunConfig,
    pub config_given: bool,
    pub deterministic: bool,
    pub weights_dir: Option<PathBuf>,
}

fn context(cli: &Cli) -> Result<Context, Failure> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::parse("")?,
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.validate()?;
    }
    let weights_dir = cli.weights_dir.clone().or_else(|| config.paths.weights_dir.clone());
    Ok(Context {
        config,
        config_given: cli.config.is_some(),
        deterministic: cli.deterministic,
        weights_dir,
    })
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match context(&cli).and_then(|ctx| commands::dispatch(&cli.command, &ctx)) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
