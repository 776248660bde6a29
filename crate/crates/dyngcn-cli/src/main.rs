//! Command line front end: generate or load weighted evolving graphs, train
//! the evolving-weight GCN, score link-capacity predictions, and sweep
//! hyperparameters.
//!
//! Exit codes: 0 on success, 2 for configuration and contract errors, 3 for
//! data and input errors, 4 for numeric failures.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use dyngcn::error::{Error, Result};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "dyngcn",
    version,
    about = "Dynamic graph embeddings for link-capacity prediction on evolving graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic streaming event and save it as an event directory
    Generate(Flags),
    /// Summarize an event: per-step sizes, degrees, weights, evolution
    Stats(Flags),
    /// Train at one step (or every step) and write checkpoint, trace, embedding
    Train(Flags),
    /// Score a checkpoint (or per-step retrains) against future edges
    Eval(Flags),
    /// Grid search over window sizes and embedding dimensions
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML config file; flags and --set pairs override its values
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set learning_rate=0.05 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Event manifest to load instead of generating data
    #[arg(long)]
    data: Option<PathBuf>,

    /// Output directory for artifacts
    #[arg(long)]
    out: Option<PathBuf>,

    /// Master seed for initialization and generation
    #[arg(long)]
    seed: Option<u64>,

    /// Number of past snapshots the weights evolve over
    #[arg(long)]
    window: Option<usize>,

    /// Comma-separated GCN layer widths, e.g. 32,16
    #[arg(long)]
    dims: Option<String>,

    /// Prediction head: inner or mlp
    #[arg(long)]
    head: Option<String>,

    /// Snapshot index to train or evaluate at (default: K-2)
    #[arg(long)]
    step: Option<usize>,

    /// Checkpoint to evaluate (default: <out>/checkpoint.json)
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Also train and score a static GCN on the same step
    #[arg(long)]
    baseline: bool,

    /// Repeat for every snapshot instead of a single step
    #[arg(long)]
    all_steps: bool,

    /// Overwrite existing output files
    #[arg(long)]
    force: bool,

    /// Record real wall-clock times in the training trace
    #[arg(long)]
    timing: bool,

    /// Freeze every parameter except the shared transforms H
    #[arg(long = "train-only-H")]
    train_only_h: bool,
}

/// Applies precedence: built-in defaults, then the config file, then --set
/// pairs, then explicit flags. Returns the config and whether the seed was
/// given on the command line (generate forwards it into the synth config).
fn build_config(flags: &Flags) -> Result<(RunConfig, bool)> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load_file(path)?,
        None => RunConfig::default(),
    };
    for pair in &flags.sets {
        cfg.apply_set(pair)?;
    }
    if let Some(v) = &flags.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &flags.out {
        cfg.out = v.clone();
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.window {
        cfg.window = v;
    }
    if let Some(v) = &flags.dims {
        cfg.apply_set(&format!("dims={v}"))?;
    }
    if let Some(v) = &flags.head {
        cfg.apply_set(&format!("head={v}"))?;
    }
    if let Some(v) = flags.step {
        cfg.step = Some(v);
    }
    if let Some(v) = &flags.checkpoint {
        cfg.checkpoint = Some(v.clone());
    }
    if flags.baseline {
        cfg.baseline = true;
    }
    if flags.all_steps {
        cfg.all_steps = true;
    }
    if flags.force {
        cfg.force = true;
    }
    if flags.timing {
        cfg.timing = true;
    }
    if flags.train_only_h {
        cfg.train_only_h = true;
    }
    let seed_explicit = flags.seed.is_some()
        || flags
            .sets
            .iter()
            .any(|s| s.split('=').next().map(str::trim) == Some("seed"));
    Ok((cfg, seed_explicit))
}

pub(crate) fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Contract(_) | Error::Dimension { .. } | Error::EmptyTestSet(_) => 2,
        Error::Parse { .. }
        | Error::Data(_)
        | Error::Io { .. }
        | Error::UndefinedMetric(_)
        | Error::UndefinedLoss(_) => 3,
        Error::Numeric { .. } => 4,
    }
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(f) => {
            let (cfg, seed_explicit) = build_config(&f)?;
            commands::cmd_generate(&cfg, seed_explicit)?;
            Ok(0)
        }
        Command::Stats(f) => {
            let (cfg, _) = build_config(&f)?;
            commands::cmd_stats(&cfg)?;
            Ok(0)
        }
        Command::Train(f) => {
            let (cfg, _) = build_config(&f)?;
            commands::cmd_train(&cfg)?;
            Ok(0)
        }
        Command::Eval(f) => {
            let (cfg, _) = build_config(&f)?;
            commands::cmd_eval(&cfg)?;
            Ok(0)
        }
        Command::Sweep(f) => {
            let (cfg, _) = build_config(&f)?;
            commands::cmd_sweep(&cfg)
        }
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
