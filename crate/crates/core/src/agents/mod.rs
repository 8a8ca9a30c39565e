//! Online learning agents and their shared bookkeeping.
//!
//! [`tsmdp::run_tsmdp`] is the posterior-sampling agent: it resamples a
//! parameter at every recurrence of the start state and plays that
//! parameter's optimal policy for the whole cycle. [`ucrl2::run_ucrl2`] is
//! the optimism baseline. Both emit a [`SimulationResult`] with the same
//! checkpoint layout so runs aggregate uniformly.
//!
//! One run owns its RNG and posterior; a driver may execute many runs
//! concurrently and aggregate afterwards.

pub mod tsmdp;
pub mod ucrl2;

pub use tsmdp::{run_tsmdp, CycleCapPolicy, EpochEvent, PolicySolutions, TsmdpOutcome, TsmdpParams};
pub use ucrl2::{run_ucrl2, Ucrl2Config, Ucrl2Delta, Ucrl2Params};

use crate::error::{Error, Result};
use crate::mdp::StationaryPolicy;
use crate::posterior::PosteriorState;
use crate::scalar::Float;

/// Default cap on the length of a single recurrence cycle.
pub const DEFAULT_CYCLE_CAP: u64 = 1_000_000;

/// Snapshot of the run state at one checkpoint time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRecord<F> {
    pub t: u64,
    pub cumulative_reward: F,
    /// `t · mu_star − cumulative_reward`.
    pub pseudo_regret: F,
    /// Number of steps so far whose action differed from the true optimal
    /// policy's prescription in the occupied state.
    pub suboptimal_steps: u64,
}

/// One epoch of the posterior-sampling agent, for the optional trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochRecord {
    /// Time at which the epoch ended (the return to the start state).
    pub t_end: u64,
    /// Grid index sampled at the epoch start.
    pub sampled_point: usize,
    /// Identifier of the policy played, indexing the realized policy set.
    pub policy_id: usize,
}

/// Regret time series of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult<F> {
    pub horizon: u64,
    pub checkpoints: Vec<CheckpointRecord<F>>,
    pub epoch_trace: Option<Vec<EpochRecord>>,
    pub seed: u64,
}

/// Per-policy epoch, step and pair-transition counters of one run.
///
/// Policies are identified by their index in the realized policy set. At
/// every epoch boundary `Σ_c steps = t`, `Σ_c epochs = k` and each policy's
/// pair counts sum to its step count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochLedger {
    n_policies: usize,
    n_states: usize,
    /// Policy id chosen in each completed or running epoch, in order.
    pub epoch_policy_of: Vec<usize>,
    /// `V_c`: time steps played under each policy.
    pub steps_per_policy: Vec<u64>,
    /// `N_c`: epochs begun under each policy.
    pub epochs_per_policy: Vec<u64>,
    /// `J(c, s1, s2)`: transitions `s1 -> s2` observed while playing `c`.
    pair_counts: Vec<u64>,
}

impl EpochLedger {
    pub fn new(n_policies: usize, n_states: usize) -> Self {
        Self {
            n_policies,
            n_states,
            epoch_policy_of: Vec::new(),
            steps_per_policy: vec![0; n_policies],
            epochs_per_policy: vec![0; n_policies],
            pair_counts: vec![0; n_policies * n_states * n_states],
        }
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Completed plus running epoch count.
    pub fn epoch_index(&self) -> usize {
        self.epoch_policy_of.len()
    }

    #[inline]
    pub(crate) fn record_step(&mut self, policy_id: usize, s1: usize, s2: usize) {
        self.steps_per_policy[policy_id] += 1;
        self.pair_counts[(policy_id * self.n_states + s1) * self.n_states + s2] += 1;
    }

    pub(crate) fn begin_epoch(&mut self, policy_id: usize) {
        self.epochs_per_policy[policy_id] += 1;
        self.epoch_policy_of.push(policy_id);
    }

    #[inline]
    pub fn pair_count(&self, policy_id: usize, s1: usize, s2: usize) -> u64 {
        self.pair_counts[(policy_id * self.n_states + s1) * self.n_states + s2]
    }

    /// Iterates over nonzero `(policy, s1, s2, count)` entries.
    pub fn nonzero_pairs(&self) -> impl Iterator<Item = (usize, usize, usize, u64)> + '_ {
        self.pair_counts.iter().enumerate().filter(|(_, &n)| n > 0).map(|(i, &n)| {
            let s2 = i % self.n_states;
            let s1 = (i / self.n_states) % self.n_states;
            let c = i / (self.n_states * self.n_states);
            (c, s1, s2, n)
        })
    }

    /// Checks the counter consistency identities at an epoch boundary.
    pub fn check_consistency(&self, t: u64) -> Result<()> {
        let steps: u64 = self.steps_per_policy.iter().sum();
        if steps != t {
            return Err(Error::Runtime(format!("ledger steps {steps} != t {t}")));
        }
        let epochs: u64 = self.epochs_per_policy.iter().sum();
        if epochs != self.epoch_policy_of.len() as u64 {
            return Err(Error::Runtime("ledger epoch counters disagree".into()));
        }
        for c in 0..self.n_policies {
            let pairs: u64 = (0..self.n_states)
                .flat_map(|s1| (0..self.n_states).map(move |s2| (s1, s2)))
                .map(|(s1, s2)| self.pair_count(c, s1, s2))
                .sum();
            if pairs != self.steps_per_policy[c] {
                return Err(Error::Runtime(format!(
                    "pair counts for policy {c} sum to {pairs}, steps say {}",
                    self.steps_per_policy[c]
                )));
            }
        }
        Ok(())
    }
}

/// Rebuilds posterior log-weights from aggregated pair counts alone:
/// `log w(θ) = log prior(θ) + Σ_{c,s1,s2} J(c,s1,s2) · log p_θ(s1, c(s1), s2)`.
///
/// Must agree with the incrementally maintained weights at every epoch
/// boundary; it is the sufficiency identity tying the ledger to the
/// posterior.
pub fn reconstruct_log_weights<F: Float>(
    ledger: &EpochLedger,
    policies: &[StationaryPolicy],
    prior: &PosteriorState<F>,
) -> Vec<F> {
    let mut weights = prior.log_weights().to_vec();
    for (c, s1, s2, count) in ledger.nonzero_pairs() {
        let a = policies[c].action(s1);
        let n = F::of(count as f64);
        for (point, w) in weights.iter_mut().enumerate() {
            *w += n * prior.log_likelihood(point, s1, a, s2);
        }
    }
    weights
}

/// Per-checkpoint mean and percentile summary across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub mean_pseudo_regret: f64,
    pub regret_percentiles: Vec<f64>,
    pub mean_suboptimal_steps: f64,
    pub suboptimal_percentiles: Vec<f64>,
}

/// Summary table over a batch of runs sharing a checkpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub percentiles: Vec<f64>,
    pub rows: Vec<AggregateRow>,
}

/// Aggregates pseudo-regret and suboptimal-step series across runs.
///
/// All runs must share the same checkpoint times. Percentiles use linear
/// interpolation between closest ranks.
pub fn aggregate_runs<F: Float>(
    results: &[&SimulationResult<F>],
    percentiles: &[f64],
) -> Result<AggregateTable> {
    let first = results
        .first()
        .ok_or_else(|| Error::config("aggregate_runs needs at least one run"))?;
    if percentiles.iter().any(|p| !(0.0..=100.0).contains(p)) {
        return Err(Error::config("percentiles must lie in [0, 100]"));
    }
    let times: Vec<u64> = first.checkpoints.iter().map(|c| c.t).collect();
    for r in results {
        let theirs: Vec<u64> = r.checkpoints.iter().map(|c| c.t).collect();
        if theirs != times {
            return Err(Error::config("runs have mismatched checkpoint grids"));
        }
    }
    let n = results.len() as f64;
    let rows = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut regrets: Vec<f64> =
                results.iter().map(|r| r.checkpoints[i].pseudo_regret.as_f64()).collect();
            let mut subopt: Vec<f64> =
                results.iter().map(|r| r.checkpoints[i].suboptimal_steps as f64).collect();
            let mean_regret = regrets.iter().sum::<f64>() / n;
            let mean_subopt = subopt.iter().sum::<f64>() / n;
            regrets.sort_by(f64::total_cmp);
            subopt.sort_by(f64::total_cmp);
            AggregateRow {
                t,
                mean_pseudo_regret: mean_regret,
                regret_percentiles: percentiles
                    .iter()
                    .map(|&p| percentile_sorted(&regrets, p))
                    .collect(),
                mean_suboptimal_steps: mean_subopt,
                suboptimal_percentiles: percentiles
                    .iter()
                    .map(|&p| percentile_sorted(&subopt, p))
                    .collect(),
            }
        })
        .collect();
    Ok(AggregateTable { percentiles: percentiles.to_vec(), rows })
}

/// Interpolated percentile of an ascending-sorted slice.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = rank - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Validates a checkpoint grid against a horizon: strictly increasing,
/// positive, and ending no later than the horizon.
pub(crate) fn validate_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::config("need at least one checkpoint"));
    }
    if checkpoints[0] == 0 {
        return Err(Error::config("checkpoints must be positive"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("checkpoints must be strictly increasing"));
    }
    if *checkpoints.last().unwrap() > horizon {
        return Err(Error::config("checkpoints must not exceed the horizon"));
    }
    Ok(())
}
