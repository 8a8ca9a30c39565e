//! `analyze`: decision regions, KL profile, resolvability, the scaling
//! constant with its witness, and the certificate bound when configured.

use std::path::Path;

use serde::Serialize;
use tsmdp::analysis::{
    epsilon_min, regret_constant, region_analysis_from_solutions, theorem4_bound, verify_witness,
    AnalysisConfig, EpsilonMin, RegionAnalysis,
};
use tsmdp::agents::PolicySolutions;
use tsmdp::error::{Error, Result};
use tsmdp::mdp::PolicyClass;
use tsmdp::Grid;

use crate::config::{AnalysisSection, ExperimentConfig};
use crate::output::{fmt_f64, OutputDir};

#[derive(Serialize)]
struct AnalyzeSummary {
    n_points: usize,
    n_policies: usize,
    c_star: usize,
    policies: Vec<Vec<usize>>,
    epsilon: f64,
    epsilon_prime: f64,
    a4: f64,
    epsilon_min: Option<f64>,
    epsilon_min_note: String,
    constant: Option<ConstantReport>,
    theorem4: Option<Theorem4Report>,
    truth_appended_to_grid: bool,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct ConstantReport {
    value: f64,
    diag_sum: f64,
    tau_weighted_value: Option<f64>,
    target: f64,
    vacuous: bool,
    ordering: Vec<usize>,
    witnesses: Vec<usize>,
    x: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Theorem4Report {
    delta: f64,
    l_coords: usize,
    delta_tilde: f64,
    bound: f64,
}

/// Builds the analysis grid and runs the full analysis; also used by the
/// acceptance suite.
pub fn analyze_instance(
    config: &ExperimentConfig,
    section: &AnalysisSection,
) -> Result<(RegionAnalysis<f64>, Grid, usize, bool, PolicySolutions<f64>)> {
    let instance = config.instantiate()?;
    let grid = instance.grid.ok_or_else(|| {
        Error::Config("analyze needs grid_axes in the config".into())
    })?;
    // the reference point must be on the grid; append the truth if absent
    let (grid, true_index, appended) = match instance.true_index {
        Some(idx) => (grid, idx, false),
        None => {
            let mut mdps: Vec<_> = grid.mdps().to_vec();
            let mut labels: Vec<String> =
                (0..grid.len()).map(|i| grid.label(i).to_string()).collect();
            let mut coords: Vec<Vec<f64>> =
                (0..grid.len()).map(|i| grid.coords(i).to_vec()).collect();
            mdps.push(instance.true_mdp.clone());
            labels.push("true".into());
            coords.push(Vec::new());
            let extended = Grid::new(mdps, labels, coords)?;
            let idx = extended.len() - 1;
            (extended, idx, true)
        }
    };
    let analysis_config = AnalysisConfig {
        epsilon: section.epsilon,
        epsilon_prime: section.epsilon_prime.resolve()?,
        a4: section.a4,
    };
    let solutions = PolicySolutions::solve(&instance.true_mdp, &grid, &PolicyClass::All)?;
    let analysis =
        region_analysis_from_solutions(&grid, &instance.true_mdp, &solutions, analysis_config)?;
    Ok((analysis, grid, true_index, appended, solutions))
}

pub fn run(config: &ExperimentConfig, config_text: &str, out_dir: &Path) -> Result<()> {
    let section = config.analysis.clone().unwrap_or(AnalysisSection {
        epsilon: 0.1,
        epsilon_prime: crate::config::EpsilonPrime::Value(0.0),
        a4: 0.0,
        compute_constant: true,
        certificate: None,
    });
    let (analysis, grid, _true_index, appended, _solutions) =
        analyze_instance(config, &section)?;
    let mut out = OutputDir::create(out_dir, config_text, config.base_seed)?;
    let mut notes = Vec::new();
    if appended {
        notes.push(
            "true parameter was not a grid point; appended as reference point \"true\"".into(),
        );
    }

    // decision-region table with the divergence profile
    let n_policies = analysis.profile.n_policies();
    let mut header: Vec<String> = vec![
        "index".into(),
        "grid_label".into(),
        "optimal_policy".into(),
        "region_subset".into(),
    ];
    for c in 0..n_policies {
        header.push(format!("d_policy{c}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|point| {
            let c = analysis.regions.region_of[point];
            let subset = if analysis.regions.s_prime[c].contains(&point) {
                "near"
            } else {
                "separated"
            };
            let mut cells = vec![
                point.to_string(),
                grid.label(point).to_string(),
                c.to_string(),
                subset.to_string(),
            ];
            cells.extend((0..n_policies).map(|c| fmt_f64(analysis.profile.value(point, c))));
            cells
        })
        .collect();
    out.write_csv("decision_regions.csv", &header_refs, &rows)?;

    let (eps_min_value, eps_min_note) = match epsilon_min(&analysis) {
        EpsilonMin::Positive(v) => (Some(v), "positive".to_string()),
        EpsilonMin::Zero { point, policy } => (
            Some(0.0),
            format!("zero at point {point} in region of policy {policy}; the scaling constant is infinite"),
        ),
        EpsilonMin::NoSuboptimalNearPoints => {
            (None, "no suboptimal near-region points; the log-horizon term is vacuous".into())
        }
    };

    // return times for the time-weighted objective, when they exist
    let true_mdp = config.instantiate()?.true_mdp;
    let tau_bars: Option<Vec<f64>> = analysis
        .policies
        .iter()
        .map(|p| {
            true_mdp
                .induce(p)
                .and_then(|chain| chain.expected_return_time(config.s0))
                .ok()
        })
        .collect();
    if tau_bars.is_none() {
        notes.push(
            "expected return times unavailable for some realized policy; \
             the time-weighted objective is omitted"
                .into(),
        );
    }

    let constant = if section.compute_constant {
        let rc = regret_constant(&analysis, tau_bars.as_deref())?;
        verify_witness(&analysis, &rc)?;
        Some(ConstantReport {
            value: rc.value,
            diag_sum: rc.diag_sum,
            tau_weighted_value: rc.tau_weighted_value,
            target: rc.target,
            vacuous: rc.vacuous,
            ordering: rc.ordering,
            witnesses: rc.witnesses,
            x: rc.x,
        })
    } else {
        None
    };

    let theorem4 = match &section.certificate {
        Some(cert) => {
            let bound = theorem4_bound(&analysis, cert.delta, cert.l_coords)?;
            Some(Theorem4Report {
                delta: cert.delta,
                l_coords: cert.l_coords,
                delta_tilde: bound.delta_tilde,
                bound: bound.bound,
            })
        }
        None => None,
    };

    let summary = AnalyzeSummary {
        n_points: grid.len(),
        n_policies,
        c_star: analysis.regions.c_star,
        policies: analysis.policies.iter().map(|p| p.actions().to_vec()).collect(),
        epsilon: section.epsilon,
        epsilon_prime: section.epsilon_prime.resolve()?,
        a4: section.a4,
        epsilon_min: eps_min_value,
        epsilon_min_note: eps_min_note,
        constant,
        theorem4,
        truth_appended_to_grid: appended,
        notes,
    };
    out.write_json("analysis.json", &summary)?;
    if let Some(c) = &summary.constant {
        println!("scaling constant: {}", c.value);
    }
    if let Some(e) = summary.epsilon_min {
        println!("epsilon_min: {e}");
    }
    out.finish()
}
