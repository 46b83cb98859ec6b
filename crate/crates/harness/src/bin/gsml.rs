//! Command-line entry point for the ground-state learning harness.
//!
//! Every subcommand reads the same JSON experiment config and writes its
//! artifacts under the output directory. Exit codes: 0 on success, 2 for
//! configuration/usage errors, 3 when a requested size exceeds a hard
//! capacity limit, 1 for anything else.

use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use gsml_core::error::Error;
use gsml_harness::commands;
use gsml_harness::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "gsml", version, about = "Learn ground-state observables from couplings")]
struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: config's `output_dir`, then `gsml-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample instances, solve ground states, and write the dataset.
    GenData,
    /// Cross-validate and fit one model per observable.
    Train,
    /// Score trained models on the held-out split.
    Eval,
    /// Run the configured sweep end to end.
    Sweep,
    /// Certify the operator-norm bound on random observables.
    VerifyNorm,
    /// Report per-edge weight mass of trained models.
    Importance,
    /// Measure how far away couplings influence each observable.
    ProbeLocality,
}

fn run(cli: Cli) -> Result<(), Error> {
    let config_path = cli
        .config
        .ok_or_else(|| Error::arg("--config <file> is required"))?;
    let mut cfg = ExperimentConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("gsml-out"));

    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Error::arg("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::arg(format!("thread pool setup failed: {e}")))?;
    }

    match cli.command {
        Command::GenData => commands::gen_data(&cfg, &out),
        Command::Train => commands::train(&cfg, &out),
        Command::Eval => commands::eval(&cfg, &out),
        Command::Sweep => commands::run_sweep(&cfg, &out),
        Command::VerifyNorm => commands::verify_norm(&cfg, &out),
        Command::Importance => commands::importance(&cfg, &out),
        Command::ProbeLocality => commands::probe_locality(&cfg, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        let code = match e {
            Error::Argument(_) => 2,
            Error::Capacity(_) => 3,
            _ => 1,
        };
        process::exit(code);
    }
}
