//! `simulate`: fan the configured agents across seeded runs on a worker
//! pool, write per-run and aggregate regret series, and a manifest with
//! seeds, hashes and any per-run failures.

use std::path::Path;

use rayon::prelude::*;
use tsmdp::agents::{
    aggregate_runs, run_tsmdp, run_ucrl2, PolicySolutions, SimulationResult, TsmdpParams,
    Ucrl2Config, Ucrl2Params,
};
use tsmdp::error::{Error, Result};
use tsmdp::mdp::PolicyClass;
use tsmdp::posterior::PosteriorState;
use tsmdp::{Grid, Mdp};

use crate::config::{AgentConfig, ExperimentConfig};
use crate::output::{fmt_f64, OutputDir};

pub fn run(config: &ExperimentConfig, config_text: &str, out_dir: &Path) -> Result<()> {
    if config.agents.is_empty() {
        return Err(Error::Config("simulate needs at least one agent".into()));
    }
    let instance = config.instantiate()?;
    let pool = super::build_pool(config.workers)?;
    let mut out = OutputDir::create(out_dir, config_text, config.base_seed)?;
    out.manifest.run_seeds = (0..config.n_runs).map(|i| config.run_seed(i)).collect();

    let needs_grid = config.agents.iter().any(|a| matches!(a, AgentConfig::Tsmdp));
    let solutions = if needs_grid {
        let grid = instance.grid.as_ref().ok_or_else(|| {
            Error::Config("the tsmdp agent needs grid_axes in the config".into())
        })?;
        Some(PolicySolutions::solve(&instance.true_mdp, grid, &PolicyClass::All)?)
    } else {
        None
    };

    for agent in &config.agents {
        let name = agent.name();
        let results: Vec<(u64, Result<AgentRun>)> = pool.install(|| {
            (0..config.n_runs)
                .into_par_iter()
                .map(|i| {
                    let seed = config.run_seed(i);
                    let result = run_agent(
                        agent,
                        config,
                        &instance.true_mdp,
                        instance.grid.as_ref(),
                        solutions.as_ref(),
                        seed,
                    );
                    (i, result)
                })
                .collect()
        });

        let mut successes: Vec<(u64, AgentRun)> = Vec::new();
        for (i, result) in results {
            match result {
                Ok(run) => successes.push((i, run)),
                Err(e) => out.record_failure(format!("{name}/run{i:03}"), &e),
            }
        }
        if successes.len() < config.n_runs as usize {
            out.warn(format!(
                "{name}: aggregate computed over {} of {} runs (failures recorded)",
                successes.len(),
                config.n_runs
            ));
        }
        if successes.is_empty() {
            out.warn(format!("{name}: no successful runs"));
            continue;
        }

        for (i, run) in &successes {
            let rows: Vec<Vec<String>> = run
                .result
                .checkpoints
                .iter()
                .map(|cp| {
                    vec![
                        i.to_string(),
                        cp.t.to_string(),
                        fmt_f64(cp.cumulative_reward),
                        fmt_f64(cp.pseudo_regret),
                        cp.suboptimal_steps.to_string(),
                    ]
                })
                .collect();
            out.write_csv(
                &format!("run{i:03}_{name}.csv"),
                &["run_id", "t", "cumulative_reward", "pseudo_regret", "suboptimal_steps"],
                &rows,
            )?;
            for (t, shot) in &run.posterior_snapshots {
                let grid = instance.grid.as_ref().expect("snapshots imply a grid");
                let rows: Vec<Vec<String>> = shot
                    .iter()
                    .enumerate()
                    .map(|(p, prob)| vec![grid.label(p).to_string(), fmt_f64(*prob)])
                    .collect();
                out.write_csv(
                    &format!("run{i:03}_{name}_posterior_t{t}.csv"),
                    &["grid_label", "probability"],
                    &rows,
                )?;
            }
        }

        let refs: Vec<&SimulationResult<f64>> =
            successes.iter().map(|(_, r)| &r.result).collect();
        let table = aggregate_runs(&refs, &config.percentiles)?;
        let mut header: Vec<String> = vec!["t".into(), "mean_regret".into()];
        for p in &config.percentiles {
            header.push(format!("p{p}_regret"));
        }
        header.push("mean_suboptimal_steps".into());
        for p in &config.percentiles {
            header.push(format!("p{p}_suboptimal_steps"));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![row.t.to_string(), fmt_f64(row.mean_pseudo_regret)];
                cells.extend(row.regret_percentiles.iter().map(|v| fmt_f64(*v)));
                cells.push(fmt_f64(row.mean_suboptimal_steps));
                cells.extend(row.suboptimal_percentiles.iter().map(|v| fmt_f64(*v)));
                cells
            })
            .collect();
        out.write_csv(&format!("aggregate_{name}.csv"), &header_refs, &rows)?;
    }

    out.finish()
}

struct AgentRun {
    result: SimulationResult<f64>,
    posterior_snapshots: Vec<(u64, Vec<f64>)>,
}

fn run_agent(
    agent: &AgentConfig,
    config: &ExperimentConfig,
    true_mdp: &Mdp,
    grid: Option<&Grid>,
    solutions: Option<&PolicySolutions<f64>>,
    seed: u64,
) -> Result<AgentRun> {
    match agent {
        AgentConfig::Tsmdp => {
            let grid = grid.expect("checked by caller");
            let prior = match &config.prior_weights {
                None => None,
                Some(w) => Some(w.as_slice()),
            };
            let mut params = TsmdpParams::new(
                true_mdp,
                grid,
                config.s0,
                config.horizon(),
                &config.horizons,
                seed,
            );
            params.prior = prior;
            params.cycle_cap = config.cycle_cap;
            params.cycle_cap_policy = config.cycle_cap_policy.into();
            params.solutions = solutions;

            if config.posterior_snapshots.is_empty() {
                let outcome = run_tsmdp(&params)?;
                Ok(AgentRun { result: outcome.result, posterior_snapshots: Vec::new() })
            } else {
                let mut pending = config.posterior_snapshots.clone();
                pending.sort_unstable();
                let mut shots: Vec<(u64, Vec<f64>)> = Vec::new();
                let outcome = tsmdp::agents::tsmdp::run_tsmdp_observed(&params, |event| {
                    while let Some(&next) = pending.first() {
                        if event.t_end >= next {
                            shots.push((next, event.posterior.probabilities()));
                            pending.remove(0);
                        } else {
                            break;
                        }
                    }
                })?;
                Ok(AgentRun { result: outcome.result, posterior_snapshots: shots })
            }
        }
        AgentConfig::Ucrl2 { delta } => {
            let params = Ucrl2Params {
                true_mdp,
                config: Ucrl2Config { delta: delta.to_core()? },
                s0: config.s0,
                horizon: config.horizon(),
                seed,
                checkpoints: &config.horizons,
            };
            let result = run_ucrl2(&params)?;
            Ok(AgentRun { result, posterior_snapshots: Vec::new() })
        }
    }
}

/// Shared helper for tests: builds the prior posterior of a config's grid.
#[allow(dead_code)]
pub fn prior_of(config: &ExperimentConfig, grid: &Grid) -> Result<PosteriorState<f64>> {
    PosteriorState::init(grid, config.prior_weights.as_deref())
}
