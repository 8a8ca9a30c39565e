//! UCRL2 baseline (Jaksch, Ortner, Auer 2010) with known rewards.
//!
//! Episodes end when some state-action visit count doubles; each episode
//! plans against the most optimistic MDP in an L1 confidence polytope around
//! the empirical kernel, via extended value iteration. Rewards are known
//! here, so there is no reward confidence term and the value iteration uses
//! the raw reward table.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, PolicyClass, StationaryPolicy};
use crate::scalar::Float;

use super::tsmdp::sample_row;
use super::{validate_checkpoints, CheckpointRecord, SimulationResult};

/// Iteration cap for one extended value iteration solve.
const EVI_MAX_ITERS: usize = 2_000_000;

/// Confidence schedule for the transition intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ucrl2Delta {
    /// Fixed confidence parameter in `(0, 1]`.
    Fixed(f64),
    /// Horizon-dependent choice `delta = 1/T`.
    OneOverT,
}

/// Baseline configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ucrl2Config {
    pub delta: Ucrl2Delta,
}

impl Ucrl2Config {
    pub fn validate(&self) -> Result<()> {
        if let Ucrl2Delta::Fixed(d) = self.delta {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::config(format!("delta {d} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    fn resolve(&self, horizon: u64) -> f64 {
        match self.delta {
            Ucrl2Delta::Fixed(d) => d,
            Ucrl2Delta::OneOverT => 1.0 / horizon as f64,
        }
    }
}

/// Inputs of one UCRL2 run.
pub struct Ucrl2Params<'a, F> {
    pub true_mdp: &'a FiniteMdp<F>,
    pub config: Ucrl2Config,
    /// Initial state of the trajectory.
    pub s0: usize,
    pub horizon: u64,
    pub seed: u64,
    pub checkpoints: &'a [u64],
}

/// L1 confidence radius for the transition row of a state-action pair,
/// `sqrt(14 S log(2 A t / delta) / max(1, N(s,a)))`.
pub fn confidence_radius(n_states: usize, n_actions: usize, t: u64, delta: f64, visits: u64) -> f64 {
    let s = n_states as f64;
    let a = n_actions as f64;
    let num = 14.0 * s * (2.0 * a * t as f64 / delta).ln();
    (num / visits.max(1) as f64).sqrt()
}

/// Runs UCRL2 against the true MDP, reporting the same regret series layout
/// as the posterior-sampling agent. The pseudo-regret reference `mu_star`
/// and the suboptimal-step reference policy come from the exact solver.
pub fn run_ucrl2<F: Float>(params: &Ucrl2Params<'_, F>) -> Result<SimulationResult<F>> {
    params.config.validate()?;
    let mdp = params.true_mdp;
    let n_states = mdp.n_states();
    let n_actions = mdp.n_actions();
    if params.s0 >= n_states {
        return Err(Error::config(format!("start state {} out of range", params.s0)));
    }
    validate_checkpoints(params.checkpoints, params.horizon)?;
    let delta = params.config.resolve(params.horizon);

    let solution = mdp.optimal_policy(&PolicyClass::All)?;
    let mu_star = solution.gain;
    let c_star = solution.policy;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut visits = vec![0u64; n_states * n_actions];
    let mut transitions = vec![0u64; n_states * n_actions * n_states];
    let mut episode_visits = vec![0u64; n_states * n_actions];

    let mut checkpoints = Vec::with_capacity(params.checkpoints.len());
    let mut next_checkpoint = 0usize;

    let mut t: u64 = 0;
    let mut state = params.s0;
    let mut cumulative = F::zero();
    let mut suboptimal: u64 = 0;

    let mut evi = ExtendedValueIteration::new(n_states, n_actions);

    while t < params.horizon {
        // start a new episode at time t_k = t + 1 (1-based step count)
        episode_visits.iter_mut().for_each(|v| *v = 0);
        let policy = evi.solve(mdp, &visits, &transitions, t + 1, delta)?;

        loop {
            let action = policy.action(state);
            let sa = state * n_actions + action;
            // episode ends when the in-episode count reaches the prior count
            if episode_visits[sa] >= visits[sa].max(1) {
                break;
            }
            let next = sample_row(mdp.kernel_row(state, action), &mut rng);
            cumulative += mdp.reward(state, action);
            if action != c_star.action(state) {
                suboptimal += 1;
            }
            episode_visits[sa] += 1;
            transitions[sa * n_states + next] += 1;
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
            if t >= params.horizon {
                break;
            }
        }
        for (v, e) in visits.iter_mut().zip(&episode_visits) {
            *v += e;
        }
    }

    Ok(SimulationResult {
        horizon: params.horizon,
        checkpoints,
        epoch_trace: None,
        seed: params.seed,
    })
}

/// Extended value iteration over the optimistic transition polytope.
struct ExtendedValueIteration {
    n_states: usize,
    n_actions: usize,
    u: Vec<f64>,
    next: Vec<f64>,
    order: Vec<usize>,
    p_hat: Vec<f64>,
    p_opt: Vec<f64>,
}

impl ExtendedValueIteration {
    fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            u: vec![0.0; n_states],
            next: vec![0.0; n_states],
            order: (0..n_states).collect(),
            p_hat: vec![0.0; n_states],
            p_opt: vec![0.0; n_states],
        }
    }

    /// One planning solve: returns the greedy policy of the optimistic MDP.
    /// Stops when the span of the value increments drops below `1/sqrt(t)`.
    fn solve<F: Float>(
        &mut self,
        mdp: &FiniteMdp<F>,
        visits: &[u64],
        transitions: &[u64],
        t: u64,
        delta: f64,
    ) -> Result<StationaryPolicy> {
        let n = self.n_states;
        let na = self.n_actions;
        let accuracy = 1.0 / (t as f64).sqrt();
        self.u.iter_mut().for_each(|v| *v = 0.0);

        let mut actions = vec![0usize; n];
        for _ in 0..EVI_MAX_ITERS {
            // shared descending order of current values
            self.order.sort_by(|&a, &b| self.u[b].total_cmp(&self.u[a]));
            for s in 0..n {
                let mut best = f64::NEG_INFINITY;
                let mut best_action = 0usize;
                for a in 0..na {
                    let sa = s * na + a;
                    let radius = confidence_radius(n, na, t, delta, visits[sa]);
                    let q = mdp.reward(s, a).as_f64()
                        + self.optimistic_value(&transitions[sa * n..(sa + 1) * n], visits[sa], radius);
                    if q > best {
                        best = q;
                        best_action = a;
                    }
                }
                self.next[s] = best;
                actions[s] = best_action;
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in 0..n {
                let d = self.next[s] - self.u[s];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            // renormalize to keep values bounded across iterations
            let offset = self.next[0];
            for s in 0..n {
                self.u[s] = self.next[s] - offset;
            }
            if hi - lo < accuracy {
                return Ok(StationaryPolicy::new(actions));
            }
        }
        Err(Error::numerical(
            format!("extended value iteration did not reach accuracy {accuracy:.3e} in {EVI_MAX_ITERS} iterations"),
            accuracy,
        ))
    }

    /// Inner maximization over the L1 ball: start from the empirical row,
    /// move mass of up to `radius/2` onto the best state, then strip mass
    /// from the worst states until the row is stochastic again.
    fn optimistic_value(&mut self, counts: &[u64], visits: u64, radius: f64) -> f64 {
        let total = visits.max(1) as f64;
        for (p, &c) in self.p_hat.iter_mut().zip(counts) {
            *p = c as f64 / total;
        }
        self.p_opt.copy_from_slice(&self.p_hat);
        let best = self.order[0];
        self.p_opt[best] = (self.p_hat[best] + radius / 2.0).min(1.0);
        let mut excess: f64 = self.p_opt.iter().sum::<f64>() - 1.0;
        if excess > 0.0 {
            for &s in self.order.iter().rev() {
                if s == best {
                    continue;
                }
                let cut = excess.min(self.p_opt[s]);
                self.p_opt[s] -= cut;
                excess -= cut;
                if excess <= 0.0 {
                    break;
                }
            }
        }
        self.p_opt.iter().zip(&self.u).map(|(p, u)| p * u).sum()
    }
}
