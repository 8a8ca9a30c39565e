//! `solve`: compute the true model's optimal policy, gain, stationary
//! distribution and arrival curve, and write them as plot-ready CSVs.

use std::path::Path;

use serde::Serialize;
use tsmdp::error::Result;
use tsmdp::mdp::PolicyClass;

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, OutputDir};

#[derive(Serialize)]
struct SolveSummary {
    gain: f64,
    policy: Vec<usize>,
    stationary_mode: usize,
    n_states: usize,
    n_actions: usize,
}

pub fn run(config: &ExperimentConfig, config_text: &str, out_dir: &Path) -> Result<()> {
    let instance = config.instantiate()?;
    let mut out = OutputDir::create(out_dir, config_text, config.base_seed)?;

    let solution = instance.true_mdp.optimal_policy(&PolicyClass::All)?;
    let chain = instance.true_mdp.induce(&solution.policy)?;
    let pi = chain.stationary_distribution()?;

    let policy_rows: Vec<Vec<String>> = (0..instance.true_mdp.n_states())
        .map(|s| vec![s.to_string(), solution.policy.action(s).to_string()])
        .collect();
    out.write_csv("optimal_policy.csv", &["state", "action"], &policy_rows)?;

    let pi_rows: Vec<Vec<String>> = pi
        .iter()
        .enumerate()
        .map(|(s, p)| vec![s.to_string(), fmt_f64(*p)])
        .collect();
    out.write_csv("stationary_distribution.csv", &["state", "probability"], &pi_rows)?;

    if let Some(curve) = &instance.arrival_curve {
        let rows: Vec<Vec<String>> = curve
            .iter()
            .enumerate()
            .map(|(s, l)| vec![s.to_string(), fmt_f64(*l)])
            .collect();
        out.write_csv("arrival_rate.csv", &["state", "lambda"], &rows)?;
    }

    out.write_json("true_mdp.json", &instance.true_mdp)?;

    let mode = pi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(s, _)| s)
        .unwrap_or(0);
    let summary = SolveSummary {
        gain: solution.gain,
        policy: solution.policy.actions().to_vec(),
        stationary_mode: mode,
        n_states: instance.true_mdp.n_states(),
        n_actions: instance.true_mdp.n_actions(),
    };
    out.write_json("solve_summary.json", &summary)?;
    println!("optimal average reward: {}", solution.gain);
    out.finish()
}
