//! Posterior-sampling agent over a finite parameter grid.
//!
//! The agent runs in epochs delimited by returns to the start state `s0`:
//! at each epoch start it samples a grid point from the posterior, plays that
//! point's average-reward optimal policy until the chain next hits `s0`, and
//! updates the posterior after every observed transition. Optimal policies
//! are solved once per grid point up front; the distinct solutions form the
//! realized policy set against which epoch statistics are kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::families::ParamGrid;
use crate::mdp::{FiniteMdp, PolicyClass, StationaryPolicy};
use crate::posterior::PosteriorState;
use crate::scalar::Float;

use super::{
    validate_checkpoints, CheckpointRecord, EpochLedger, EpochRecord, SimulationResult,
    DEFAULT_CYCLE_CAP,
};

/// What to do when an epoch reaches the cycle cap without returning to the
/// start state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleCapPolicy {
    /// Abort the run with a runtime error (the cap suggests transience).
    Error,
    /// End the epoch at the cap and resample from the current state. The
    /// cap then acts as an extra stopping time; posterior updates and
    /// ledger counters are unaffected. Useful when some candidate policies
    /// make the start state practically unreachable.
    Resample,
}

/// Cached per-grid-point solutions and the realized policy set.
#[derive(Debug, Clone)]
pub struct PolicySolutions<F> {
    /// Distinct optimal policies found across the grid, plus the true
    /// optimum; this is the realized competition class.
    pub policies: Vec<StationaryPolicy>,
    /// Grid point index -> index into `policies`.
    pub region_of: Vec<usize>,
    /// Index of the true MDP's optimal policy in `policies`.
    pub c_star: usize,
    /// Optimal long-run average reward of the true MDP.
    pub mu_star: F,
}

impl<F: Float> PolicySolutions<F> {
    /// Solves every grid point and the true MDP against the same policy
    /// class, deduplicating identical policies.
    pub fn solve(
        true_mdp: &FiniteMdp<F>,
        grid: &ParamGrid<F>,
        class: &PolicyClass,
    ) -> Result<Self> {
        let mut policies: Vec<StationaryPolicy> = Vec::new();
        let mut region_of = Vec::with_capacity(grid.len());
        let mut intern = |p: StationaryPolicy| -> usize {
            match policies.iter().position(|q| *q == p) {
                Some(i) => i,
                None => {
                    policies.push(p);
                    policies.len() - 1
                }
            }
        };
        for mdp in grid.mdps() {
            let solved = mdp.optimal_policy(class)?;
            region_of.push(intern(solved.policy));
        }
        let true_solution = true_mdp.optimal_policy(class)?;
        let c_star = intern(true_solution.policy);
        Ok(Self { policies, region_of, c_star, mu_star: true_solution.gain })
    }

    pub fn n_policies(&self) -> usize {
        self.policies.len()
    }

    pub fn c_star_policy(&self) -> &StationaryPolicy {
        &self.policies[self.c_star]
    }
}

/// Inputs of one posterior-sampling run.
pub struct TsmdpParams<'a, F> {
    pub true_mdp: &'a FiniteMdp<F>,
    pub grid: &'a ParamGrid<F>,
    /// Prior weights aligned to the grid; `None` means uniform.
    pub prior: Option<&'a [F]>,
    /// Start state whose recurrence times delimit epochs.
    pub s0: usize,
    pub horizon: u64,
    pub policy_class: &'a PolicyClass,
    pub seed: u64,
    /// Times at which to record the regret series; strictly increasing.
    pub checkpoints: &'a [u64],
    /// Abort or resample once a single epoch exceeds this many steps.
    pub cycle_cap: u64,
    /// Behavior at the cycle cap.
    pub cycle_cap_policy: CycleCapPolicy,
    /// Record the per-epoch (end time, sampled point, policy) trace.
    pub record_epoch_trace: bool,
    /// Reuse per-grid-point optimal policies solved up front (they are
    /// deterministic in the grid and class, so a driver can share one solve
    /// across many runs).
    pub solutions: Option<&'a PolicySolutions<F>>,
}

impl<'a, F: Float> TsmdpParams<'a, F> {
    pub fn new(
        true_mdp: &'a FiniteMdp<F>,
        grid: &'a ParamGrid<F>,
        s0: usize,
        horizon: u64,
        checkpoints: &'a [u64],
        seed: u64,
    ) -> Self {
        Self {
            true_mdp,
            grid,
            prior: None,
            s0,
            horizon,
            policy_class: &PolicyClass::All,
            seed,
            checkpoints,
            cycle_cap: DEFAULT_CYCLE_CAP,
            cycle_cap_policy: CycleCapPolicy::Error,
            record_epoch_trace: false,
            solutions: None,
        }
    }
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct TsmdpOutcome<F> {
    pub result: SimulationResult<F>,
    pub ledger: EpochLedger,
    /// Posterior state at the end of the run.
    pub posterior: PosteriorState<F>,
    pub solutions: PolicySolutions<F>,
}

/// Epoch-boundary event passed to an observer.
pub struct EpochEvent<'a, F> {
    /// Epoch index `k` (1-based) that just ended.
    pub k: usize,
    /// Time `t_k` of the return to the start state.
    pub t_end: u64,
    pub sampled_point: usize,
    pub policy_id: usize,
    pub ledger: &'a EpochLedger,
    pub posterior: &'a PosteriorState<F>,
}

/// Runs the agent with a no-op epoch observer.
pub fn run_tsmdp<F: Float>(params: &TsmdpParams<'_, F>) -> Result<TsmdpOutcome<F>> {
    run_tsmdp_observed(params, |_| {})
}

/// Runs the agent, invoking `observer` at every completed epoch boundary.
pub fn run_tsmdp_observed<F: Float>(
    params: &TsmdpParams<'_, F>,
    mut observer: impl FnMut(&EpochEvent<'_, F>),
) -> Result<TsmdpOutcome<F>> {
    let mdp = params.true_mdp;
    let n_states = mdp.n_states();
    if params.s0 >= n_states {
        return Err(Error::config(format!("start state {} out of range", params.s0)));
    }
    if !params.grid.mdp(0).same_shape(mdp) {
        return Err(Error::config("grid MDPs and true MDP must share shape and rewards"));
    }
    validate_checkpoints(params.checkpoints, params.horizon)?;

    let solutions = match params.solutions {
        Some(shared) => {
            if shared.region_of.len() != params.grid.len() {
                return Err(Error::config("shared policy solutions do not match the grid"));
            }
            shared.clone()
        }
        None => PolicySolutions::solve(mdp, params.grid, params.policy_class)?,
    };
    check_recurrence(mdp, params.grid, &solutions, params.s0)?;

    let mut posterior = PosteriorState::init(params.grid, params.prior)?;
    let mut ledger = EpochLedger::new(solutions.n_policies(), n_states);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let c_star = solutions.c_star_policy().clone();
    let mu_star = solutions.mu_star;

    let mut checkpoints = Vec::with_capacity(params.checkpoints.len());
    let mut next_checkpoint = 0usize;
    let mut trace = params.record_epoch_trace.then(Vec::new);

    let mut t: u64 = 0;
    let mut state = params.s0;
    let mut cumulative = F::zero();
    let mut suboptimal: u64 = 0;
    let mut k = 0usize;

    'epochs: while t < params.horizon {
        k += 1;
        let sampled_point = posterior.sample(&mut rng);
        let policy_id = solutions.region_of[sampled_point];
        ledger.begin_epoch(policy_id);
        let policy = &solutions.policies[policy_id];
        let epoch_start = t;

        loop {
            let action = policy.action(state);
            let next = sample_row(mdp.kernel_row(state, action), &mut rng);
            cumulative += mdp.reward(state, action);
            if action != c_star.action(state) {
                suboptimal += 1;
            }
            posterior.log_update(state, action, next)?;
            ledger.record_step(policy_id, state, next);
            t += 1;
            state = next;

            if next_checkpoint < params.checkpoints.len()
                && t == params.checkpoints[next_checkpoint]
            {
                checkpoints.push(CheckpointRecord {
                    t,
                    cumulative_reward: cumulative,
                    pseudo_regret: F::of(t as f64) * mu_star - cumulative,
                    suboptimal_steps: suboptimal,
                });
                next_checkpoint += 1;
            }

            if state == params.s0 {
                if let Some(trace) = trace.as_mut() {
                    trace.push(EpochRecord { t_end: t, sampled_point, policy_id });
                }
                observer(&EpochEvent {
                    k,
                    t_end: t,
                    sampled_point,
                    policy_id,
                    ledger: &ledger,
                    posterior: &posterior,
                });
                continue 'epochs;
            }
            if t >= params.horizon {
                break 'epochs;
            }
            if t - epoch_start >= params.cycle_cap {
                match params.cycle_cap_policy {
                    CycleCapPolicy::Error => {
                        return Err(Error::Runtime(format!(
                            "epoch {k} exceeded the cycle cap of {} steps without returning \
                             to state {} (policy {policy_id} may make it transient)",
                            params.cycle_cap, params.s0
                        )));
                    }
                    CycleCapPolicy::Resample => {
                        if let Some(trace) = trace.as_mut() {
                            trace.push(EpochRecord { t_end: t, sampled_point, policy_id });
                        }
                        observer(&EpochEvent {
                            k,
                            t_end: t,
                            sampled_point,
                            policy_id,
                            ledger: &ledger,
                            posterior: &posterior,
                        });
                        continue 'epochs;
                    }
                }
            }
        }
    }

    Ok(TsmdpOutcome {
        result: SimulationResult {
            horizon: params.horizon,
            checkpoints,
            epoch_trace: trace,
            seed: params.seed,
        },
        ledger,
        posterior,
        solutions,
    })
}

/// Verifies that `s0` is recurrent in the true MDP under every cached
/// optimal policy, reporting the first offending grid point.
fn check_recurrence<F: Float>(
    true_mdp: &FiniteMdp<F>,
    grid: &ParamGrid<F>,
    solutions: &PolicySolutions<F>,
    s0: usize,
) -> Result<()> {
    let mut checked = vec![false; solutions.n_policies()];
    for (point, &policy_id) in solutions.region_of.iter().enumerate() {
        if checked[policy_id] {
            continue;
        }
        checked[policy_id] = true;
        let chain = true_mdp.induce(&solutions.policies[policy_id])?;
        if !chain.is_recurrent_from(s0) {
            return Err(Error::config(format!(
                "start state {s0} is not recurrent in the true MDP under the optimal \
                 policy of grid point {point} ({})",
                grid.label(point)
            )));
        }
    }
    if !checked[solutions.c_star] {
        let chain = true_mdp.induce(solutions.c_star_policy())?;
        if !chain.is_recurrent_from(s0) {
            return Err(Error::config(format!(
                "start state {s0} is not recurrent under the true optimal policy"
            )));
        }
    }
    Ok(())
}

/// Inverse-CDF draw from a kernel row.
#[inline]
pub(crate) fn sample_row<F: Float, R: Rng>(row: &[F], rng: &mut R) -> usize {
    let u = F::of(rng.random::<f64>());
    let mut acc = F::zero();
    for (i, p) in row.iter().enumerate() {
        acc += *p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|p| *p > F::zero()).expect("stochastic row")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::reconstruct_log_weights;
    use crate::families::{
        build_two_server_mdp, grid_prior, FamilyKind, QueueConfig, TwoServerParams,
    };

    fn small_queue_config() -> QueueConfig<f64> {
        QueueConfig {
            capacity: 6,
            mu_slow: 0.3,
            mu_fast: 0.8,
            cost_slow: 0.0,
            cost_fast: 2.0,
            holding_cost: 0.5,
            service_reward: 10.0,
            lambda_cap: 0.9,
        }
    }

    fn two_server_grid(axis: &[f64]) -> (FiniteMdp<f64>, ParamGrid<f64>) {
        let config = small_queue_config();
        let grid =
            grid_prior(FamilyKind::TwoServer, &[axis.to_vec()], &config, (0.0, 1.0)).unwrap();
        let truth = build_two_server_mdp(&TwoServerParams { theta: axis[0] }, &config).unwrap();
        (truth, grid)
    }

    #[test]
    fn singleton_grid_with_truth_plays_optimally_forever() {
        let (truth, grid) = two_server_grid(&[0.4]);
        let checkpoints = [10, 100, 1000];
        let params = TsmdpParams::new(&truth, &grid, 0, 1000, &checkpoints, 7);
        let outcome = run_tsmdp(&params).unwrap();
        for cp in &outcome.result.checkpoints {
            assert_eq!(cp.suboptimal_steps, 0);
        }
    }

    #[test]
    fn epochs_end_at_start_state_and_ledger_is_consistent() {
        let (truth, grid) = two_server_grid(&[0.3, 0.4, 0.5]);
        let checkpoints = [500];
        let mut params = TsmdpParams::new(&truth, &grid, 1, 500, &checkpoints, 3);
        params.record_epoch_trace = true;
        let mut boundaries = 0usize;
        let outcome = run_tsmdp_observed(&params, |event| {
            boundaries += 1;
            assert_eq!(event.k, boundaries);
            event.ledger.check_consistency(event.t_end).unwrap();
        })
        .unwrap();
        let trace = outcome.result.epoch_trace.as_ref().unwrap();
        assert_eq!(trace.len(), boundaries);
        assert!(boundaries > 10);
        // pseudo-regret identity at every checkpoint
        for cp in &outcome.result.checkpoints {
            let expected = cp.t as f64 * outcome.solutions.mu_star - cp.cumulative_reward;
            assert_eq!(cp.pseudo_regret, expected);
        }
    }

    #[test]
    fn identical_seeds_reproduce_bit_identical_results() {
        let (truth, grid) = two_server_grid(&[0.3, 0.4, 0.5]);
        let checkpoints = [10, 100, 2000];
        let run = |seed| {
            let mut params = TsmdpParams::new(&truth, &grid, 0, 2000, &checkpoints, seed);
            params.record_epoch_trace = true;
            run_tsmdp(&params).unwrap()
        };
        let a = run(11);
        let b = run(11);
        assert_eq!(a.result, b.result);
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(a.posterior.log_weights(), b.posterior.log_weights());
        let c = run(12);
        assert_ne!(a.result, c.result);
    }

    #[test]
    fn posterior_matches_pair_count_reconstruction_at_boundaries() {
        let (truth, grid) = two_server_grid(&[0.25, 0.4, 0.55]);
        let checkpoints = [3000];
        let params = TsmdpParams::new(&truth, &grid, 0, 3000, &checkpoints, 99);
        let prior = PosteriorState::init(&grid, None).unwrap();
        let solutions = PolicySolutions::solve(&truth, &grid, &PolicyClass::All).unwrap();
        run_tsmdp_observed(&params, |event| {
            let rebuilt = reconstruct_log_weights(event.ledger, &solutions.policies, &prior);
            let live = event.posterior.log_weights();
            // compare after centering: both carry the same shared constant
            let shift = live[0] - rebuilt[0];
            for (a, b) in live.iter().zip(&rebuilt) {
                assert!((*a - (*b + shift)).abs() < 1e-9, "sufficiency gap {}", *a - *b - shift);
            }
        })
        .unwrap();
    }

    #[test]
    fn suboptimal_step_rate_decays_with_time() {
        let (truth, grid) = two_server_grid(&[0.2, 0.3, 0.4, 0.5, 0.6]);
        let checkpoints = [1000, 10_000, 100_000];
        let params = TsmdpParams::new(&truth, &grid, 0, 100_000, &checkpoints, 5);
        let outcome = run_tsmdp(&params).unwrap();
        let rates: Vec<f64> = outcome
            .result
            .checkpoints
            .iter()
            .map(|cp| cp.suboptimal_steps as f64 / cp.t as f64)
            .collect();
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "rates {rates:?}");
    }

    #[test]
    fn transient_start_state_is_rejected_by_precheck() {
        // theta = 0 makes state 0 absorbing, so interior states are transient
        let config = small_queue_config();
        let grid =
            grid_prior(FamilyKind::TwoServer, &[vec![0.0]], &config, (0.0, 1.0)).unwrap();
        let truth = build_two_server_mdp(&TwoServerParams { theta: 0.0 }, &config).unwrap();
        let checkpoints = [10];
        let params = TsmdpParams::new(&truth, &grid, 3, 10, &checkpoints, 0);
        let err = run_tsmdp(&params).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn cycle_cap_triggers_runtime_error() {
        let (truth, grid) = two_server_grid(&[0.45]);
        let checkpoints = [100_000];
        let mut params = TsmdpParams::new(&truth, &grid, 0, 100_000, &checkpoints, 1);
        params.cycle_cap = 1;
        // cap of one step cannot complete a two-step cycle
        let err = run_tsmdp(&params).unwrap_err();
        assert!(matches!(err, Error::Runtime(_)), "{err}");
    }
}
