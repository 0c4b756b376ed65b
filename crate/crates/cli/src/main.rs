//! `levyito` — simulate a Lévy process as drift + Wiener + compensated
//! small jumps + large jumps, then verify statistically that the pieces
//! behave as advertised.
//!
//! Exit codes: 0 all checks passed, 1 a verification check failed,
//! 2 configuration or usage error, 3 runtime (I/O, numerical) failure.

mod config;
mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

/// Errors that end the process. Verification *failures* are not errors —
/// they come back as exit code 1 through the normal return path.
#[derive(Debug)]
pub enum CliError {
    /// Unusable configuration or mismatched artifacts — exit code 2.
    Config(String),
    /// I/O or computation failure — exit code 3.
    Runtime(String),
}

#[derive(Parser)]
#[command(name = "levyito", version, about = "Simulate and verify Lévy process decompositions")]
struct Cli {
    /// Worker threads (0 = one per core). Outputs never depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw replica paths and write paths.csv, prm.csv, manifest.json
    Simulate(RunArgs),
    /// Run the verification battery into report.json, against stored
    /// artifacts or (when the directory has none) a fresh in-memory draw
    Verify(RunArgs),
    /// Split stored paths into large.csv, small.csv, wiener.csv
    Decompose(RunArgs),
    /// Find dilation orders of truncated jump laws, write reducibility.json
    ReduceCheck(RunArgs),
    /// Merge reducibility results into report.json and print a summary
    Report {
        /// Artifact directory holding report.json
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (TOML)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Artifact directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured replica count
    #[arg(long)]
    replicas: Option<usize>,
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    }
}

fn dispatch(command: &Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate(args) => run::simulate(&load(args)?, &args.out),
        Command::Verify(args) => run::verify(&load(args)?, &args.out),
        Command::Decompose(args) => run::decompose(&load(args)?, &args.out),
        Command::ReduceCheck(args) => run::reduce_check(&load(args)?, &args.out),
        Command::Report { out } => run::report(out),
    }
}

/// Overrides are folded into the configuration *before* hashing, so the
/// manifest hash always describes the effective run, not the file on disk.
fn load(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    config.apply_overrides(args.seed, args.replicas);
    Ok(config)
}
