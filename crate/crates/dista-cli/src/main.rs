//! `dista-sim`: configure, run, and export distributed sparse-recovery
//! experiments from a TOML document.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "dista-sim",
    version,
    about = "Simulator for distributed sparse signal recovery on sensor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one generated instance and write its trace
    Solve(CommonArgs),
    /// Recovery-probability grid over (m, nodes) cells
    Phase(CommonArgs),
    /// Mean-MSE-vs-SNR sweep across solver arms
    Snr(CommonArgs),
    /// Check stepsizes, consensus weights, and memory footprints
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for campaigns (0 = default pool); the
    /// DISTA_WORKERS environment variable works too, flags win
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output file path
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Add DELTA to consensus weight (0,1) before checking, to see the
    /// validator catch a broken matrix (debugging aid)
    #[arg(long, value_name = "DELTA")]
    perturb_consensus: Option<f64>,
}

fn load(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn resolve_workers(config: &RunConfig, flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return Ok(w);
    }
    if let Ok(raw) = std::env::var("DISTA_WORKERS") {
        return raw.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "DISTA_WORKERS must be a nonnegative integer, got \"{raw}\""
            ))
        });
    }
    Ok(config.workers.unwrap_or(0))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => {
            let config = load(&args)?;
            commands::cmd_solve(&config, args.output)
        }
        Command::Phase(args) => {
            let config = load(&args)?;
            let workers = resolve_workers(&config, args.workers)?;
            commands::cmd_phase(&config, workers, args.output)
        }
        Command::Snr(args) => {
            let config = load(&args)?;
            let workers = resolve_workers(&config, args.workers)?;
            commands::cmd_snr(&config, workers, args.output)
        }
        Command::Validate(args) => {
            let config = load(&args.common)?;
            commands::cmd_validate(&config, args.perturb_consensus)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
