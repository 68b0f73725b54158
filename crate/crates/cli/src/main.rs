//! `lbrank`: generate / train / aggregate / evaluate / bench workflows over
//! the JSON Lines dataset format and JSON model files.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 I/O failure,
//! 2 usage or validation error, 3 numerical failure. Logs go to stderr,
//! data to files or stdout.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;

#[derive(Parser)]
#[command(name = "lbrank", version, about = "Rank aggregation toolkit")]
struct Cli {
    /// JSON config file supplying defaults for any flag (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of K noisy scorers over N candidates.
    Generate(GenerateArgs),
    /// Train a linear or nested aggregation model.
    Train(TrainArgs),
    /// Apply a trained model to a dataset, emitting per-query rankings.
    Aggregate(AggregateArgs),
    /// Score predictions against a dataset's ground truth.
    Evaluate(EvaluateArgs),
    /// Measure training-time scaling in N, K, and the hidden width.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Number of candidates.
    #[arg(long)]
    n: Option<usize>,
    /// Number of scorers.
    #[arg(long)]
    k: Option<usize>,
    /// Number of queries.
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scorer profile "noise=0.25,bias=0,corrupt=0"; give once for all
    /// scorers or K times for per-scorer profiles.
    #[arg(long = "profile")]
    profiles: Vec<String>,
    /// Standard deviation of the latent score distribution.
    #[arg(long)]
    latent_spread: Option<f64>,
    /// Softmax-normalize every scorer list.
    #[arg(long)]
    softmax: bool,
    /// Dataset name recorded in the header.
    #[arg(long)]
    name: Option<String>,
    /// Output path for the JSON Lines dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Input dataset (JSON Lines).
    #[arg(long)]
    data: PathBuf,
    /// Model family: linear | nested.
    #[arg(long)]
    model: Option<String>,
    /// Concave gain: sqrt | log1p | power:<alpha> | linear.
    #[arg(long)]
    g: Option<String>,
    /// Regularization weight (linear model).
    #[arg(long)]
    lambda: Option<f64>,
    /// Bottom-layer regularization weight (nested model).
    #[arg(long)]
    lambda1: Option<f64>,
    /// Top-layer regularization weight (nested model).
    #[arg(long)]
    lambda2: Option<f64>,
    /// Learning rate.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Update granularity: full | per-query.
    #[arg(long)]
    batch: Option<String>,
    /// Convergence threshold on the largest weight change per epoch.
    #[arg(long)]
    tol: Option<f64>,
    /// Hidden width (nested model).
    #[arg(long)]
    k2: Option<usize>,
    /// Bottom activation: identity | log1p | sqrt1p (nested model).
    #[arg(long)]
    phi1: Option<String>,
    /// Top activation (nested model).
    #[arg(long)]
    phi2: Option<String>,
    /// Bottom-layer gradient: analytic | paper-literal (nested model).
    #[arg(long)]
    gradient_mode: Option<String>,
    /// Step direction: paper-descent | ascent (nested model).
    #[arg(long)]
    sense: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path for the model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct AggregateArgs {
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Input dataset (JSON Lines).
    #[arg(long)]
    data: PathBuf,
    /// Output path for JSON Lines predictions (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Predictions produced by `aggregate` (JSON Lines).
    #[arg(long)]
    pred: PathBuf,
    /// Dataset with ground truth (JSON Lines).
    #[arg(long)]
    data: PathBuf,
    /// Positional discount: log2 | custom:<v1,v2,...> (length N).
    #[arg(long)]
    discount: Option<String>,
    /// Output path for the report JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated candidate counts, e.g. 100,1000,10000.
    #[arg(long)]
    n_grid: Option<String>,
    /// Number of scorers.
    #[arg(long)]
    k: Option<usize>,
    /// Large hidden width compared against the small default of 3.
    #[arg(long)]
    k2: Option<usize>,
    /// Timing repetitions per measurement (median taken).
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// 0 success, 1 I/O, 2 usage/validation, 3 numerical failure.
fn exit_code_for(e: &lbrank::Error) -> u8 {
    match e {
        lbrank::Error::Io(_) => 1,
        lbrank::Error::Diverged { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let file_config = match FileConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args, &file_config),
        Command::Train(args) => commands::train(args, &file_config),
        Command::Aggregate(args) => commands::aggregate(args, &file_config),
        Command::Evaluate(args) => commands::evaluate(args, &file_config),
        Command::Bench(args) => commands::bench(args, &file_config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
