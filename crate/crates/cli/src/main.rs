//! Experiment driver for Thompson sampling on parameterized MDPs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsmdp_cli::{commands, exit_code_for, load_config};

#[derive(Parser)]
#[command(
    name = "tsmdp",
    about = "Thompson sampling for parameterized MDPs: solve, simulate, analyze, concentration",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (versioned JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the number of runs.
    #[arg(long, global = true)]
    runs: Option<u64>,

    /// Override the horizon (checkpoints beyond it are dropped).
    #[arg(long, global = true)]
    horizon: Option<u64>,

    /// Override the base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the true model: optimal policy, gain, stationary distribution.
    Solve,
    /// Run the configured agents across seeded runs and aggregate regret.
    Simulate,
    /// Decision regions, KL profile and the regret scaling constant.
    Analyze,
    /// Calibrate and validate the concentration envelopes.
    Concentration,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config_path) = cli.config.as_ref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let loaded = load_config(config_path, cli.runs, cli.horizon, cli.seed);
    let (config, text) = match loaded {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e) as u8);
        }
    };
    let result = match cli.command {
        Command::Solve => commands::solve::run(&config, &text, &cli.out),
        Command::Simulate => commands::simulate::run(&config, &text, &cli.out),
        Command::Analyze => commands::analyze::run(&config, &text, &cli.out),
        Command::Concentration => commands::concentration::run(&config, &text, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
