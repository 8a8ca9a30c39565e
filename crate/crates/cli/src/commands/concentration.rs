//! `concentration`: calibrate the iterated-logarithm envelope constants on
//! one batch of cycle paths and validate them on a fresh batch.

use std::path::Path;

use serde::Serialize;
use tsmdp::concentration::{
    chain_stats, check_uniform_bound, column_rng, fit_constants, holdout_violation_fraction,
    simulate_cycles, HarnessConfig,
};
use tsmdp::error::{Error, Result};
use tsmdp::mdp::{PolicyClass, StationaryPolicy};

use crate::config::{ConcentrationPolicies, ConcentrationSection, ExperimentConfig};
use crate::output::{fmt_f64, OutputDir};

/// Stream-space separation between calibration and holdout paths.
const HOLDOUT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Serialize)]
struct ConcentrationSummary {
    delta: f64,
    d1: f64,
    d2: f64,
    calibration_paths: usize,
    cycles_per_path: usize,
    holdout_paths: usize,
    holdout_violation_fraction: f64,
    n_policies: usize,
    per_pair_d1: Vec<PairFit>,
}

#[derive(Serialize)]
struct PairFit {
    s1: usize,
    s2: usize,
    d1: f64,
}

pub fn run(config: &ExperimentConfig, config_text: &str, out_dir: &Path) -> Result<()> {
    let section: &ConcentrationSection = config.concentration.as_ref().ok_or_else(|| {
        Error::Config("concentration command needs a \"concentration\" config section".into())
    })?;
    let instance = config.instantiate()?;
    let pool = super::build_pool(config.workers)?;
    let mut out = OutputDir::create(out_dir, config_text, config.base_seed)?;

    let n_paths = match section.n_paths {
        Some(n) => n,
        None => {
            out.warn("n_paths missing; defaulting to 1000");
            1000
        }
    };

    let policies: Vec<StationaryPolicy> = match section.policies {
        ConcentrationPolicies::Optimal => {
            vec![instance.true_mdp.optimal_policy(&PolicyClass::All)?.policy]
        }
        ConcentrationPolicies::Enumerate => {
            let states = instance.true_mdp.n_states();
            let actions = instance.true_mdp.n_actions();
            if actions.pow(states as u32) > 64 {
                return Err(Error::Config(
                    "policy enumeration too large; use \"optimal\"".into(),
                ));
            }
            StationaryPolicy::enumerate_all(states, actions)
        }
    };

    let harness = HarnessConfig {
        mdp: &instance.true_mdp,
        policies: &policies,
        s0: config.s0,
        cycles_per_path: section.cycles_per_path,
        cycle_cap: config.cycle_cap,
        include_rewards: section.include_rewards,
    };

    let (report, fraction) = pool.install(|| -> Result<_> {
        let report = fit_constants(&harness, section.delta, n_paths, config.base_seed)?;
        let fraction = holdout_violation_fraction(
            &harness,
            &report.spec,
            section.holdout_paths,
            config.base_seed ^ HOLDOUT_SEED_SALT,
        )?;
        Ok((report, fraction))
    })?;

    // per-cycle-count worst deviations of one fresh diagnostic path
    let stats: Vec<_> =
        policies.iter().map(|p| chain_stats(&instance.true_mdp, p, config.s0)).collect::<Result<_>>()?;
    let mut diag_rng = column_rng(config.base_seed ^ 1, u64::MAX);
    let diag: Vec<_> = policies
        .iter()
        .map(|p| {
            simulate_cycles(
                &instance.true_mdp,
                p,
                config.s0,
                section.cycles_per_path,
                config.cycle_cap,
                &mut diag_rng,
            )
        })
        .collect::<Result<_>>()?;
    let union = policies.len() as f64 * (instance.true_mdp.n_states() as f64).powi(2);
    let mut rows = Vec::new();
    for k_exp in 1.. {
        let k = 1usize << k_exp;
        if k > section.cycles_per_path {
            break;
        }
        let truncated: Vec<_> = diag
            .iter()
            .map(|s| {
                let mut copy = s.clone();
                copy.cycle_lengths.truncate(k);
                copy.cycle_rewards.truncate(k);
                copy
            })
            .collect();
        let check = check_uniform_bound(
            &truncated,
            &stats,
            &report.spec,
            union,
            section.include_rewards,
        )?;
        rows.push(vec![
            k.to_string(),
            fmt_f64(check.worst_ratio_sq.sqrt()),
            fmt_f64(report.spec.envelope_sq(k.max(2), union).sqrt()),
        ]);
    }
    out.write_csv("deviation_profile.csv", &["k", "worst_ratio", "envelope"], &rows)?;

    let n = instance.true_mdp.n_states();
    let summary = ConcentrationSummary {
        delta: section.delta,
        d1: report.spec.d1,
        d2: report.spec.d2,
        calibration_paths: report.calibration_paths,
        cycles_per_path: report.cycles_per_path,
        holdout_paths: section.holdout_paths,
        holdout_violation_fraction: fraction,
        n_policies: policies.len(),
        per_pair_d1: report
            .per_pair_d1
            .iter()
            .enumerate()
            .map(|(i, &d1)| PairFit { s1: i / n, s2: i % n, d1 })
            .collect(),
    };
    out.write_json("concentration.json", &summary)?;
    println!(
        "fitted d1 = {} (d2 = e); holdout violation fraction {}",
        report.spec.d1, fraction
    );
    out.finish()
}
