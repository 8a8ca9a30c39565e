//! Experiment driver library behind the `tsmdp` binary; exposed so
//! integration tests can call commands in-process.

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

use tsmdp::error::{Error, Result};

pub use config::ExperimentConfig;

/// Process exit codes of the CLI.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::Precondition(_) | Error::Capacity(_) | Error::Validation(_) => 2,
        Error::Numerical { .. } | Error::Runtime(_) => 3,
        Error::InfiniteConstant(_) => 4,
    }
}

/// Loads, validates and applies command-line overrides to a config file.
pub fn load_config(
    path: &Path,
    runs_override: Option<u64>,
    horizon_override: Option<u64>,
    seed_override: Option<u64>,
) -> Result<(ExperimentConfig, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {path:?}: {e}")))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(runs) = runs_override {
        config.n_runs = runs;
    }
    if let Some(horizon) = horizon_override {
        config.horizons.retain(|&t| t < horizon);
        config.horizons.push(horizon);
    }
    if let Some(seed) = seed_override {
        config.base_seed = seed;
    }
    config.validate()?;
    // the manifest hashes the effective config, overrides included
    let effective = config.to_json();
    Ok((config, effective))
}
