//! Command-line front end: train replica ensembles, evaluate checkpoints,
//! analyze relation patterns, and synthesize datasets.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

mod commands;
mod config;
mod csv;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Usage-class error raised by flag/config validation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "kge",
    version,
    about = "Knowledge graph embeddings trained as ensembles of low-dimensional replicas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a k-replica ensemble and write a checkpoint, training curves
    /// and a reproducible manifest.
    Train(TrainArgs),
    /// Evaluate one checkpoint, or aggregate several seed-varied
    /// checkpoints into mean/std metrics.
    Eval(EvalArgs),
    /// Categorize relations, mine symmetric rules, and optionally break
    /// metrics down per category.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic dataset in triple TSV format.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonConfig {
    /// Flat key=value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// Model kind: transe, rotate, distmult, complex, distmultn3, complexn3.
    #[arg(long)]
    model: Option<String>,
    /// Per-replica embedding size d_l (adjustable scalars per embedding).
    #[arg(long)]
    dim: Option<usize>,
    /// Number of replicas.
    #[arg(long)]
    k: Option<usize>,
    /// Maximum concurrent replica trainings.
    #[arg(long)]
    workers: Option<usize>,
    /// Dataset directory with train.txt/valid.txt/test.txt.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Output directory for checkpoint, curves and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Repeated independent runs (seed-varied), one checkpoint each.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// adam or adagrad.
    #[arg(long)]
    optimizer: Option<String>,
    /// Mini-batches per epoch (binary logistic loss).
    #[arg(long)]
    batches: Option<usize>,
    /// Batch size (multiclass loss).
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Negatives per positive per corruption side.
    #[arg(long)]
    eta: Option<usize>,
    /// Margin of the distance-based models.
    #[arg(long)]
    gamma: Option<f64>,
    /// Regularization coefficient.
    #[arg(long)]
    lambda: Option<f64>,
    /// TransE norm order: 1 or 2.
    #[arg(long)]
    norm: Option<usize>,
    #[arg(long = "max-epochs")]
    max_epochs: Option<usize>,
    #[arg(long = "valid-every")]
    valid_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// Dataset directory the checkpoints were trained on.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Output directory for metrics.json and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint file(s); several files aggregate into mean/std rows.
    #[arg(required = true)]
    checkpoints: Vec<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonConfig,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Optional checkpoint for the per-category metrics table.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Confidence threshold for symmetric-rule mining.
    #[arg(long = "sym-threshold")]
    sym_threshold: Option<f64>,
    /// Multiplicity threshold separating "1" from "n".
    #[arg(long = "cat-threshold")]
    cat_threshold: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// symmetric, 1-n, n-1, n-n or mixed.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    entities: Option<usize>,
    /// Pattern anchors: pairs (symmetric), heads (1-n), tails (n-1),
    /// blocks (n-n), or the total triple budget (mixed).
    #[arg(long)]
    pairs: Option<usize>,
    /// Fan parameter n.
    #[arg(long)]
    fan: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep clap's rendering but force the documented usage code;
            // --help/--version still exit 0.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };

    if let Some(threads) = thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let outcome = match cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Analyze(args) => commands::analyze::run(args),
        Command::Synth(args) => commands::synth::run(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    }
}

/// KGE_THREADS caps total concurrency (worker threads and evaluation pool).
fn thread_cap() -> Option<usize> {
    std::env::var("KGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

fn classify(err: &anyhow::Error) -> i32 {
    use kge_core::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidConfig(_) | E::OddComplexWidth { .. } | E::LossKindMismatch { .. } => 1,
                E::MissingFile(_)
                | E::MalformedLine { .. }
                | E::VocabularyMismatch { .. }
                | E::CorruptCheckpoint(_)
                | E::InfeasibleSpec(_)
                | E::EntityOutOfBounds { .. }
                | E::RelationOutOfBounds { .. }
                | E::EmptyAggregate
                | E::EmptyRanks => 2,
                _ => 3,
            };
        }
    }
    3
}
