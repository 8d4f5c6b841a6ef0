//! Command-line driver: fixture generation, stream building, condensation,
//! continual-learning experiments, and metric evaluation.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 runtime divergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "delome",
    version,
    about = "Graph continual learning with condensed memories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic block model graph directory.
    Gen(GenArgs),
    /// Build a class-incremental task stream from a graph directory.
    Split(SplitArgs),
    /// Learn (or sample) a memory for one task.
    Condense(CondenseArgs),
    /// Run a continual-learning experiment from a config file.
    Run(RunArgs),
    /// Compute AA/AF from an accuracy-matrix CSV.
    Eval(EvalArgs),
}

fn parse_prob(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} must be in [0,1]"));
    }
    Ok(v)
}

#[derive(Args)]
struct GenArgs {
    /// Comma-separated block sizes, e.g. 50,50,50,50 (one class per block).
    #[arg(long, value_delimiter = ',', required = true)]
    blocks: Vec<usize>,
    /// Within-block edge probability.
    #[arg(long, value_parser = parse_prob)]
    intra: f64,
    /// Between-block edge probability.
    #[arg(long, value_parser = parse_prob)]
    inter: f64,
    #[arg(long, default_value_t = 8)]
    feature_dim: usize,
    /// Norm of each block's feature-mean offset.
    #[arg(long, default_value_t = 1.0)]
    center_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output graph directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Input graph directory.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    classes_per_task: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output stream directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CondenseArgs {
    /// Stream directory (use with --task).
    #[arg(long, conflicts_with = "graph")]
    stream: Option<PathBuf>,
    /// Task index within the stream.
    #[arg(long, default_value_t = 0)]
    task: usize,
    /// Graph directory; treated as a single task over all its classes.
    #[arg(long, required_unless_present = "stream")]
    graph: Option<PathBuf>,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 800)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    fanout: usize,
    #[arg(long, default_value_t = 2)]
    hops: usize,
    /// Optimizer for the synthetic features: adam or sgd.
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Output directory for memory_<task>.json / memory_<task>.bin.
    #[arg(long)]
    out: PathBuf,
    /// Also train classifiers on the condensed and on an equal-budget
    /// sampled memory and print both test accuracies.
    #[arg(long)]
    report_expressiveness: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run once per budget value, emitting budget_sweep.csv.
    #[arg(long, value_delimiter = ',')]
    budget_sweep: Option<Vec<usize>>,
    /// Run once per target imbalance ratio (train nodes per class over
    /// budget), emitting imbalance_sweep.csv.
    #[arg(long, value_delimiter = ',')]
    imbalance_sweep: Option<Vec<f64>>,
}

#[derive(Args)]
struct EvalArgs {
    /// Accuracy-matrix CSV (lower-triangular).
    #[arg(long)]
    matrix: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Split(args) => commands::split(args),
        Command::Condense(args) => commands::condense(args),
        Command::Run(args) => commands::run(args),
        Command::Eval(args) => commands::eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_divergence() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
