//! Experiment configuration: a single versioned JSON document. Unknown keys
//! are rejected so a config file pins an experiment unambiguously.

use serde::{Deserialize, Serialize};
use tsmdp::agents::{CycleCapPolicy, Ucrl2Delta};
use tsmdp::error::{Error, Result};
use tsmdp::families::{
    build_queue_mdp, build_two_server_mdp, build_two_state_mdp, grid_prior, FamilyKind,
    QueueConfig, QueueParams, TwoServerParams, TwoStateParams,
};
use tsmdp::{Grid, Mdp};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    pub family: FamilyConfig,
    /// Per-dimension axis values for the parameter grid. Queue axes are in
    /// normalized units (multiplied by `state_scale`); other families use
    /// raw parameter units.
    #[serde(default)]
    pub grid_axes: Option<Vec<Vec<f64>>>,
    /// Prior over grid points: omitted for uniform.
    #[serde(default)]
    pub prior_weights: Option<Vec<f64>>,
    /// Start state (initial state and epoch marker).
    pub s0: usize,
    /// Checkpoint times, ascending; the last entry is the horizon.
    pub horizons: Vec<u64>,
    #[serde(default = "default_runs")]
    pub n_runs: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    #[serde(default = "default_percentiles")]
    pub percentiles: Vec<f64>,
    #[serde(default = "default_cycle_cap")]
    pub cycle_cap: u64,
    #[serde(default)]
    pub cycle_cap_policy: CapPolicyConfig,
    /// Worker pool size; `TSMDP_LAB_THREADS` overrides, else the number of
    /// available cores.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Posterior snapshot times (recorded at the first epoch boundary at or
    /// after each time), written per run when non-empty.
    #[serde(default)]
    pub posterior_snapshots: Vec<u64>,
    #[serde(default)]
    pub analysis: Option<AnalysisSection>,
    #[serde(default)]
    pub concentration: Option<ConcentrationSection>,
}

fn default_runs() -> u64 {
    1
}

fn default_percentiles() -> Vec<f64> {
    vec![20.0, 80.0]
}

fn default_cycle_cap() -> u64 {
    tsmdp::agents::DEFAULT_CYCLE_CAP
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicyConfig {
    #[default]
    Error,
    Resample,
}

impl From<CapPolicyConfig> for CycleCapPolicy {
    fn from(value: CapPolicyConfig) -> Self {
        match value {
            CapPolicyConfig::Error => CycleCapPolicy::Error,
            CapPolicyConfig::Resample => CycleCapPolicy::Resample,
        }
    }
}

/// Queue constants shared by the queue families.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QueueConstants {
    pub capacity: usize,
    pub mu_slow: f64,
    pub mu_fast: f64,
    pub cost_slow: f64,
    pub cost_fast: f64,
    pub holding_cost: f64,
    pub service_reward: f64,
    pub lambda_cap: f64,
}

impl QueueConstants {
    pub fn to_core(&self) -> QueueConfig<f64> {
        QueueConfig {
            capacity: self.capacity,
            mu_slow: self.mu_slow,
            mu_fast: self.mu_fast,
            cost_slow: self.cost_slow,
            cost_fast: self.cost_fast,
            holding_cost: self.holding_cost,
            service_reward: self.service_reward,
            lambda_cap: self.lambda_cap,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// Queue with a Gaussian-shaped state-dependent arrival curve; the true
    /// parameter and grid axes are in normalized units scaled by
    /// `state_scale`.
    Queue {
        queue: QueueConstants,
        state_scale: f64,
        true_mu_bar: f64,
        true_sigma_bar: f64,
    },
    /// Two-server queue with a scalar Bernoulli arrival probability.
    TwoServer { queue: QueueConstants, true_theta: f64 },
    /// 2-state/2-action chain with canonical transition parameters
    /// `(p12_a1, p21_a1, p12_a2, p21_a2)` and state rewards `(r1, r2)`.
    TwoState { rewards: (f64, f64), true_params: [f64; 4] },
    /// A raw MDP loaded from the documented JSON schema; solve-only (no
    /// parameter grid).
    MdpFile { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentConfig {
    Tsmdp,
    Ucrl2 { delta: DeltaConfig },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DeltaConfig {
    Fixed(f64),
    Schedule(String),
}

impl DeltaConfig {
    pub fn to_core(&self) -> Result<Ucrl2Delta> {
        match self {
            DeltaConfig::Fixed(d) => Ok(Ucrl2Delta::Fixed(*d)),
            DeltaConfig::Schedule(s) if s == "one_over_T" => Ok(Ucrl2Delta::OneOverT),
            DeltaConfig::Schedule(s) => {
                Err(Error::Config(format!("unknown delta schedule {s:?}")))
            }
        }
    }
}

impl AgentConfig {
    /// Stable name used in output file names and manifests.
    pub fn name(&self) -> String {
        match self {
            AgentConfig::Tsmdp => "tsmdp".into(),
            AgentConfig::Ucrl2 { delta: DeltaConfig::Fixed(d) } => format!("ucrl2_d{d}"),
            AgentConfig::Ucrl2 { delta: DeltaConfig::Schedule(_) } => "ucrl2_dT".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Region split threshold; the string "inf" means infinity.
    #[serde(default)]
    pub epsilon_prime: EpsilonPrime,
    #[serde(default)]
    pub a4: f64,
    /// Whether to run the scaling-constant optimization.
    #[serde(default = "default_true")]
    pub compute_constant: bool,
    /// Optional certificate for the explicit bound: requires `l_coords`
    /// suboptimal divergence coordinates of at least `delta` per near-region
    /// point.
    #[serde(default)]
    pub certificate: Option<CertificateConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EpsilonPrime {
    Value(f64),
    Infinite(String),
}

impl Default for EpsilonPrime {
    fn default() -> Self {
        EpsilonPrime::Value(0.0)
    }
}

impl EpsilonPrime {
    pub fn resolve(&self) -> Result<f64> {
        match self {
            EpsilonPrime::Value(v) => Ok(*v),
            EpsilonPrime::Infinite(s) if s == "inf" => Ok(f64::INFINITY),
            EpsilonPrime::Infinite(s) => {
                Err(Error::Config(format!("epsilon_prime must be a number or \"inf\", got {s:?}")))
            }
        }
    }
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub delta: f64,
    pub l_coords: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSection {
    #[serde(default = "default_conc_delta")]
    pub delta: f64,
    /// Calibration path count; defaults to 1000 with a warning when omitted.
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default = "default_holdout")]
    pub holdout_paths: usize,
    pub cycles_per_path: usize,
    /// Which policies form the matrix columns: every deterministic policy
    /// ("enumerate", small state spaces only) or just the true optimum
    /// ("optimal").
    #[serde(default)]
    pub policies: ConcentrationPolicies,
    /// Also check the cycle-reward deviation family with the same constants.
    #[serde(default)]
    pub include_rewards: bool,
}

fn default_conc_delta() -> f64 {
    0.05
}

fn default_holdout() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationPolicies {
    #[default]
    Optimal,
    Enumerate,
}

/// Everything instantiated from a config: the true MDP and optionally the
/// parameter grid (with truth location when it lies on the grid).
pub struct Instance {
    pub true_mdp: Mdp,
    pub grid: Option<Grid>,
    /// Index of the true parameter inside `grid`, when it is a grid point.
    pub true_index: Option<usize>,
    /// Arrival curve of the true queue model, for the solve report.
    pub arrival_curve: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must be non-empty".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("horizons must be strictly ascending".into()));
        }
        if self.n_runs < 1 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if let FamilyConfig::Queue { state_scale, .. } = &self.family {
            if *state_scale <= 0.0 {
                return Err(Error::Config("state_scale must be positive".into()));
            }
        }
        Ok(())
    }

    /// The simulation horizon (largest checkpoint).
    pub fn horizon(&self) -> u64 {
        *self.horizons.last().expect("validated non-empty")
    }

    /// Seed of run `i`, derived as `base_seed XOR i` (stable contract).
    pub fn run_seed(&self, run: u64) -> u64 {
        self.base_seed ^ run
    }

    /// Builds the true MDP and the grid described by this config.
    pub fn instantiate(&self) -> Result<Instance> {
        match &self.family {
            FamilyConfig::Queue { queue, state_scale, true_mu_bar, true_sigma_bar } => {
                let qc = queue.to_core();
                let params = QueueParams {
                    mu_bar: true_mu_bar * state_scale,
                    sigma_bar: true_sigma_bar * state_scale,
                };
                let true_mdp = build_queue_mdp(&params, &qc)?;
                let curve = tsmdp::families::arrival_curve(&params, &qc);
                let grid = self
                    .grid_axes
                    .as_ref()
                    .map(|axes| {
                        let scaled: Vec<Vec<f64>> = axes
                            .iter()
                            .map(|axis| axis.iter().map(|v| v * state_scale).collect())
                            .collect();
                        grid_prior(FamilyKind::Queue, &scaled, &qc, (0.0, 1.0))
                    })
                    .transpose()?;
                let true_index = grid
                    .as_ref()
                    .and_then(|g| g.find_coords(&[params.mu_bar, params.sigma_bar]));
                Ok(Instance { true_mdp, grid, true_index, arrival_curve: Some(curve) })
            }
            FamilyConfig::TwoServer { queue, true_theta } => {
                let qc = queue.to_core();
                let true_mdp = build_two_server_mdp(&TwoServerParams { theta: *true_theta }, &qc)?;
                let grid = self
                    .grid_axes
                    .as_ref()
                    .map(|axes| grid_prior(FamilyKind::TwoServer, axes, &qc, (0.0, 1.0)))
                    .transpose()?;
                let true_index = grid.as_ref().and_then(|g| g.find_coords(&[*true_theta]));
                let curve = Some(vec![*true_theta; qc.capacity + 1]);
                Ok(Instance { true_mdp, grid, true_index, arrival_curve: curve })
            }
            FamilyConfig::TwoState { rewards, true_params } => {
                let params = TwoStateParams {
                    p12_a1: true_params[0],
                    p21_a1: true_params[1],
                    p12_a2: true_params[2],
                    p21_a2: true_params[3],
                };
                let true_mdp = build_two_state_mdp(&params, *rewards)?;
                // grid_prior needs queue constants only for queue families
                let dummy = QueueConstants {
                    capacity: 1,
                    mu_slow: 0.3,
                    mu_fast: 0.8,
                    cost_slow: 0.0,
                    cost_fast: 0.0,
                    holding_cost: 0.0,
                    service_reward: 0.0,
                    lambda_cap: 0.5,
                };
                let grid = self
                    .grid_axes
                    .as_ref()
                    .map(|axes| grid_prior(FamilyKind::TwoState, axes, &dummy.to_core(), *rewards))
                    .transpose()?;
                let true_index = grid.as_ref().and_then(|g| g.find_coords(true_params));
                Ok(Instance { true_mdp, grid, true_index, arrival_curve: None })
            }
            FamilyConfig::MdpFile { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read MDP file {path:?}: {e}"))
                })?;
                let true_mdp: Mdp = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("MDP file parse error: {e}")))?;
                if self.grid_axes.is_some() {
                    return Err(Error::Config(
                        "mdp_file family has no parameterization; grid_axes not supported".into(),
                    ));
                }
                Ok(Instance { true_mdp, grid: None, true_index: None, arrival_curve: None })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "version": 1,
            "family": {"kind": "two_server",
                       "queue": {"capacity": 6, "mu_slow": 0.3, "mu_fast": 0.8,
                                 "cost_slow": 0.0, "cost_fast": 2.0, "holding_cost": 0.5,
                                 "service_reward": 10.0, "lambda_cap": 0.9},
                       "true_theta": 0.4},
            "grid_axes": [[0.3, 0.4, 0.5]],
            "s0": 0,
            "horizons": [10, 100],
            "n_runs": 2,
            "base_seed": 7,
            "agents": [{"kind": "tsmdp"}, {"kind": "ucrl2", "delta": 0.1}]
        }"#
        .into()
    }

    #[test]
    fn parse_emit_round_trip() {
        let config = ExperimentConfig::from_json(&minimal_json()).unwrap();
        let emitted = config.to_json();
        let back = ExperimentConfig::from_json(&emitted).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = minimal_json().replace("\"n_runs\": 2,", "\"n_runs\": 2, \"mystery\": 1,");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn version_and_ordering_validated() {
        let bad = minimal_json().replace("\"version\": 1", "\"version\": 2");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = minimal_json().replace("[10, 100]", "[100, 10]");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn instantiation_finds_truth_on_grid() {
        let config = ExperimentConfig::from_json(&minimal_json()).unwrap();
        let instance = config.instantiate().unwrap();
        assert_eq!(instance.true_index, Some(1));
        assert_eq!(instance.grid.unwrap().len(), 3);
        assert_eq!(instance.true_mdp.n_states(), 7);
    }

    #[test]
    fn run_seed_is_xor() {
        let config = ExperimentConfig::from_json(&minimal_json()).unwrap();
        assert_eq!(config.run_seed(0), 7);
        assert_eq!(config.run_seed(5), 7 ^ 5);
    }

    #[test]
    fn ucrl2_delta_schedule_parses() {
        let json = minimal_json().replace(
            r#"{"kind": "ucrl2", "delta": 0.1}"#,
            r#"{"kind": "ucrl2", "delta": "one_over_T"}"#,
        );
        let config = ExperimentConfig::from_json(&json).unwrap();
        match &config.agents[1] {
            AgentConfig::Ucrl2 { delta } => {
                assert_eq!(delta.to_core().unwrap(), Ucrl2Delta::OneOverT);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(config.agents[1].name(), "ucrl2_dT");
    }
}
