//! `quatkg`: train, evaluate, analyze and export quaternion KG embeddings.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage/config error, 3 I/O or
//! malformed input, 4 non-finite numerics.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quatkg::model::InitRotation;
use quatkg::{ScoreVariant, Split, TieMode};

use crate::error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "quatkg",
    version,
    about = "Quaternion knowledge-graph embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes checkpoint, JSONL log, manifest and test report.
    Train(TrainArgs),
    /// Rank a split with a trained checkpoint.
    Eval(EvalArgs),
    /// Relation cardinality statistics, optionally with per-relation and
    /// per-category metrics of a checkpoint.
    Analyze(AnalyzeArgs),
    /// Write embeddings as tab-separated text.
    Export(ExportArgs),
    /// Run a hyperparameter grid, one training run per cell.
    Grid(GridArgs),
    /// Write a synthetic block-structured dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Score function: quatre, quate, only-rot1, only-rot2.
    #[arg(long, default_value = "quatre")]
    pub variant: ScoreVariant,
    /// Quaternion coordinates per embedding (n).
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Negatives per positive.
    #[arg(long, default_value_t = 5)]
    pub neg: usize,
    /// L2 rate.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 100)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Float width, 32 or 64.
    #[arg(long = "float", default_value_t = 64)]
    pub float_bits: u32,
    /// Rotation table init: random or identity.
    #[arg(long, default_value = "random")]
    pub init_rot: InitRotation,
    /// Half-width of the uniform init; default 1/sqrt(4n).
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// Redraw negatives that are known train triples.
    #[arg(long)]
    pub filter_negatives: bool,
    /// Regularize every row each step instead of only the rows a batch reads.
    #[arg(long)]
    pub dense_reg: bool,
    /// Compute per-triple gradients in parallel (not bit-reproducible).
    #[arg(long)]
    pub parallel_grad: bool,
    /// Tie convention for validation ranking.
    #[arg(long, default_value = "average")]
    pub ties: TieMode,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory with train.txt, valid.txt, test.txt.
    #[arg(long, required_unless_present = "manifest")]
    pub data: Option<PathBuf>,
    /// Rerun the job described by a manifest; training flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<ScoreVariant>,
    /// Take data, checkpoint and variant from a training manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long, default_value = "average")]
    pub ties: TieMode,
    /// Seed for random tie breaking.
    #[arg(long, default_value_t = 0)]
    pub tie_seed: u64,
    /// Unfiltered ranking.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub rank: RankArgs,
    /// Directory for eval-<split>.txt and eval-<split>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub rank: RankArgs,
    /// Directory for analyze.txt and analyze.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Dataset directory, for labels; numeric ids are used without it.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write relation, rot1 and rot2 blocks under `## name` headers.
    #[arg(long)]
    pub relations: bool,
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// JSON grid file; list flags below override its fields.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<ScoreVariant>,
    #[arg(long, value_delimiter = ',')]
    pub lr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub neg: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub dim: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub entities: usize,
    #[arg(long, default_value_t = 5)]
    pub relations: usize,
    /// Entity groups; each relation maps groups to groups.
    #[arg(long, default_value_t = 5)]
    pub groups: usize,
    #[arg(long, default_value_t = 200)]
    pub train: usize,
    #[arg(long, default_value_t = 25)]
    pub valid: usize,
    #[arg(long, default_value_t = 50)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QUATKG_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "QUATKG_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Export(args) => commands::export(&args),
        Command::Grid(args) => commands::grid(&args),
        Command::Synth(args) => commands::synth(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
