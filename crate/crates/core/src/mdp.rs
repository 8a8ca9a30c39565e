//! Tabular MDPs, induced Markov chains and average-reward optimal control.
//!
//! The state and action spaces are `0..n_states` and `0..n_actions`. Rewards
//! are known and deterministic; all uncertainty lives in the transition
//! kernel. Every type is immutable after construction and every operation is
//! a pure function of its inputs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::solve_linear;
use crate::scalar::Float;

/// Row-sum slack tolerated when validating a stochastic kernel.
pub const KERNEL_ROW_TOL: f64 = 1e-12;
/// Residual `‖πQ − π‖_∞` tolerated by the stationary-distribution solvers.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;
/// Relative threshold for a strict policy-improvement step.
pub const PI_IMPROVE_TOL: f64 = 1e-10;
/// Sweep cap for policy iteration (each sweep evaluates one policy exactly).
pub const PI_MAX_SWEEPS: usize = 10_000;
/// `1 − γ` of the vanishing-discount fallback solver.
pub const DISCOUNT_GAP: f64 = 1e-6;
/// Largest state count solved by direct elimination; power iteration above.
pub const DIRECT_SOLVE_MAX_STATES: usize = 512;

/// A finite MDP `(S, A, r, p)` with known rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp<F> {
    n_states: usize,
    n_actions: usize,
    /// `reward[s * n_actions + a]`
    reward: Vec<F>,
    /// `kernel[(s * n_actions + a) * n_states + s2]`
    kernel: Vec<F>,
}

impl<F: Float> FiniteMdp<F> {
    /// Builds an MDP from row-major reward and kernel tables, validating the
    /// stochasticity and finiteness invariants.
    pub fn new(n_states: usize, n_actions: usize, reward: Vec<F>, kernel: Vec<F>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("MDP needs at least one state and one action"));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::config(format!(
                "reward table has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        if kernel.len() != n_states * n_actions * n_states {
            return Err(Error::config(format!(
                "kernel table has {} entries, expected {}",
                kernel.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("reward table contains NaN or infinity"));
        }
        let tol = F::spec_tol(KERNEL_ROW_TOL);
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &kernel[(s * n_actions + a) * n_states..][..n_states];
                if row.iter().any(|p| *p < F::zero() || !p.is_finite()) {
                    return Err(Error::config(format!(
                        "kernel row (s={s}, a={a}) has a negative or non-finite entry"
                    )));
                }
                let sum: F = row.iter().copied().sum();
                if (sum - F::one()).abs() > tol {
                    return Err(Error::config(format!(
                        "kernel row (s={s}, a={a}) sums to {sum}, not 1"
                    )));
                }
            }
        }
        Ok(Self { n_states, n_actions, reward, kernel })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Reward `r(s, a)`.
    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> F {
        self.reward[s * self.n_actions + a]
    }

    /// Transition probability `p(s1, a, s2)`.
    #[inline]
    pub fn prob(&self, s1: usize, a: usize, s2: usize) -> F {
        self.kernel[(s1 * self.n_actions + a) * self.n_states + s2]
    }

    /// Kernel row `p(s, a, ·)`.
    #[inline]
    pub fn kernel_row(&self, s: usize, a: usize) -> &[F] {
        &self.kernel[(s * self.n_actions + a) * self.n_states..][..self.n_states]
    }

    /// True when both MDPs have identical state/action counts and rewards.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_states == other.n_states
            && self.n_actions == other.n_actions
            && self.reward == other.reward
    }

    /// Fixes one policy and collapses the MDP into its induced Markov chain.
    pub fn induce(&self, policy: &StationaryPolicy) -> Result<InducedChain<F>> {
        policy.validate(self)?;
        let mut transition = Vec::with_capacity(self.n_states * self.n_states);
        let mut step_reward = Vec::with_capacity(self.n_states);
        for s in 0..self.n_states {
            let a = policy.action(s);
            transition.extend_from_slice(self.kernel_row(s, a));
            step_reward.push(self.reward(s, a));
        }
        Ok(InducedChain { n_states: self.n_states, transition, step_reward })
    }

    /// Finds the policy with the best long-run average reward.
    ///
    /// With [`PolicyClass::All`] this runs policy iteration with exact
    /// gain/bias evaluation per step; with an explicit class every listed
    /// policy is scored by its exact gain and the maximum is taken, so
    /// restricted classes are honored without a Bellman shortcut. Ties break
    /// lexicographically (lowest action index, lowest state first).
    pub fn optimal_policy(&self, class: &PolicyClass) -> Result<GainResult<F>> {
        match class {
            PolicyClass::All => self.solve_policy_iteration(),
            PolicyClass::Explicit(policies) => {
                if policies.is_empty() {
                    return Err(Error::config("empty policy class"));
                }
                let mut best: Option<(F, &StationaryPolicy)> = None;
                for policy in policies {
                    let gain = self.induce(policy)?.gain()?;
                    let replace = match &best {
                        None => true,
                        Some((g, p)) => {
                            gain > *g || (gain == *g && policy.actions() < p.actions())
                        }
                    };
                    if replace {
                        best = Some((gain, policy));
                    }
                }
                let (gain, policy) = best.expect("non-empty class");
                let bias = self.induce(policy)?.bias(gain)?;
                Ok(GainResult { gain, bias, policy: policy.clone() })
            }
        }
    }

    /// Policy iteration with exact average-reward evaluation: evaluate the
    /// current policy's gain and bias by direct linear solves, then improve
    /// greedily, changing a state's action only on strict improvement and
    /// preferring the lowest action index. Exact evaluation sidesteps the
    /// span-contraction stalls of value iteration on slowly mixing chains
    /// and terminates in a handful of sweeps for unichain models.
    fn solve_policy_iteration(&self) -> Result<GainResult<F>> {
        let n = self.n_states;
        let mut policy = StationaryPolicy::constant(n, 0);
        for _ in 0..PI_MAX_SWEEPS {
            let chain = self.induce(&policy)?;
            let Ok((gain, bias)) = chain.evaluate() else {
                // quasi-reducible model: exact evaluation is rank-deficient
                // in floating point; fall back to the vanishing-discount
                // solver, which is always well-conditioned
                return self.solve_discounted_pi();
            };
            let scale = bias
                .iter()
                .fold(gain.abs().max(F::one()), |acc, b| acc.max(b.abs()));
            let tol = F::spec_tol(PI_IMPROVE_TOL) * scale;
            let mut improved = false;
            let mut next_actions = policy.actions().to_vec();
            for s in 0..n {
                let q_of = |a: usize| -> F {
                    let row = self.kernel_row(s, a);
                    let mut q = self.reward(s, a);
                    for (p, v) in row.iter().zip(&bias) {
                        q += *p * *v;
                    }
                    q
                };
                let mut best_a = policy.action(s);
                let mut best_q = q_of(best_a);
                for a in 0..self.n_actions {
                    let q = q_of(a);
                    if q > best_q + tol {
                        best_q = q;
                        best_a = a;
                    }
                }
                if best_a != policy.action(s) {
                    improved = true;
                    next_actions[s] = best_a;
                }
            }
            if !improved {
                return Ok(GainResult { gain, bias, policy });
            }
            policy = StationaryPolicy::new(next_actions);
        }
        Err(Error::numerical(
            format!("policy iteration did not stabilize within {PI_MAX_SWEEPS} sweeps"),
            f64::NAN,
        ))
    }

    /// Policy iteration at discount `1 − 1e-6`. The evaluation system
    /// `(I − γQ) V = r` is nonsingular for every chain, so this handles
    /// models whose recurrent structure is numerically degenerate; the
    /// returned gain is re-derived exactly when possible and otherwise
    /// approximated by `(1 − γ) V` at the mass mode.
    fn solve_discounted_pi(&self) -> Result<GainResult<F>> {
        let n = self.n_states;
        let gamma = F::one() - F::of(DISCOUNT_GAP);
        let mut policy = StationaryPolicy::constant(n, 0);
        let mut value = vec![F::zero(); n];
        for _ in 0..PI_MAX_SWEEPS {
            let chain = self.induce(&policy)?;
            let mut a = vec![F::zero(); n * n];
            let mut b = vec![F::zero(); n];
            for s in 0..n {
                for s2 in 0..n {
                    a[s * n + s2] = -gamma * chain.prob(s, s2);
                }
                a[s * n + s] += F::one();
                b[s] = chain.step_reward(s);
            }
            value = solve_linear(&mut a, &mut b, n)?;
            let lo = value.iter().copied().fold(F::infinity(), F::min);
            let hi = value.iter().copied().fold(F::neg_infinity(), F::max);
            let tol = F::spec_tol(PI_IMPROVE_TOL) * (F::one() + hi - lo);
            let mut improved = false;
            let mut next_actions = policy.actions().to_vec();
            for s in 0..n {
                let q_of = |action: usize| -> F {
                    let row = self.kernel_row(s, action);
                    let mut q = self.reward(s, action);
                    for (p, v) in row.iter().zip(&value) {
                        q += gamma * *p * *v;
                    }
                    q
                };
                let mut best_a = policy.action(s);
                let mut best_q = q_of(best_a);
                for action in 0..self.n_actions {
                    let q = q_of(action);
                    if q > best_q + tol {
                        best_q = q;
                        best_a = action;
                    }
                }
                if best_a != policy.action(s) {
                    improved = true;
                    next_actions[s] = best_a;
                }
            }
            if !improved {
                break;
            }
            policy = StationaryPolicy::new(next_actions);
        }
        let chain = self.induce(&policy)?;
        if let Ok((gain, bias)) = chain.evaluate() {
            return Ok(GainResult { gain, bias, policy });
        }
        let mode = chain.mass_mode(4096);
        let gain = F::of(DISCOUNT_GAP) * value[mode];
        let offset = value[0];
        let bias = value.iter().map(|v| *v - offset).collect();
        Ok(GainResult { gain, bias, policy })
    }

    /// Exact `t`-step expected cumulative reward `E[Σ_{i=0}^t R_i | S_0 = s]`
    /// under a fixed policy, by backward recursion. The `i = 0` term is the
    /// reward collected at the initial step, so `t = 0` returns
    /// `r(s, policy(s))`.
    pub fn t_step_value(&self, policy: &StationaryPolicy, t: usize, s: usize) -> Result<F> {
        policy.validate(self)?;
        if s >= self.n_states {
            return Err(Error::config(format!("state {s} out of range")));
        }
        let chain = self.induce(policy)?;
        let n = self.n_states;
        let mut h = chain.step_reward.clone();
        let mut next = vec![F::zero(); n];
        for _ in 0..t {
            for s1 in 0..n {
                let mut acc = chain.step_reward[s1];
                let row = chain.row(s1);
                for (p, v) in row.iter().zip(&h) {
                    acc += *p * *v;
                }
                next[s1] = acc;
            }
            std::mem::swap(&mut h, &mut next);
        }
        Ok(h[s])
    }
}

/// JSON wire format: `{"n_states", "n_actions", "reward": [[..]], "kernel": [[[..]]]}`
/// with row-major nesting `s -> a -> s2`.
#[derive(Serialize, Deserialize)]
struct MdpWire<F> {
    n_states: usize,
    n_actions: usize,
    reward: Vec<Vec<F>>,
    kernel: Vec<Vec<Vec<F>>>,
}

impl<F: Float + Serialize> Serialize for FiniteMdp<F> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let reward = (0..self.n_states)
            .map(|s| (0..self.n_actions).map(|a| self.reward(s, a)).collect())
            .collect();
        let kernel = (0..self.n_states)
            .map(|s| (0..self.n_actions).map(|a| self.kernel_row(s, a).to_vec()).collect())
            .collect();
        MdpWire { n_states: self.n_states, n_actions: self.n_actions, reward, kernel }
            .serialize(serializer)
    }
}

impl<'de, F: Float + Deserialize<'de>> Deserialize<'de> for FiniteMdp<F> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = MdpWire::<F>::deserialize(deserializer)?;
        let (ns, na) = (wire.n_states, wire.n_actions);
        if wire.reward.len() != ns || wire.reward.iter().any(|r| r.len() != na) {
            return Err(D::Error::custom("reward table shape mismatch"));
        }
        if wire.kernel.len() != ns
            || wire.kernel.iter().any(|k| k.len() != na || k.iter().any(|row| row.len() != ns))
        {
            return Err(D::Error::custom("kernel table shape mismatch"));
        }
        let reward = wire.reward.into_iter().flatten().collect();
        let kernel = wire.kernel.into_iter().flatten().flatten().collect();
        FiniteMdp::new(ns, na, reward, kernel).map_err(D::Error::custom)
    }
}

/// Deterministic state-to-action map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationaryPolicy {
    action_of: Vec<usize>,
}

impl StationaryPolicy {
    pub fn new(action_of: Vec<usize>) -> Self {
        Self { action_of }
    }

    /// The policy playing `action` in every state.
    pub fn constant(n_states: usize, action: usize) -> Self {
        Self { action_of: vec![action; n_states] }
    }

    #[inline]
    pub fn action(&self, s: usize) -> usize {
        self.action_of[s]
    }

    pub fn n_states(&self) -> usize {
        self.action_of.len()
    }

    pub fn actions(&self) -> &[usize] {
        &self.action_of
    }

    fn validate<F: Float>(&self, mdp: &FiniteMdp<F>) -> Result<()> {
        if self.action_of.len() != mdp.n_states() {
            return Err(Error::config(format!(
                "policy covers {} states, MDP has {}",
                self.action_of.len(),
                mdp.n_states()
            )));
        }
        if let Some((s, &a)) = self.action_of.iter().enumerate().find(|(_, &a)| a >= mdp.n_actions())
        {
            return Err(Error::config(format!(
                "policy action {a} at state {s} out of range (n_actions = {})",
                mdp.n_actions()
            )));
        }
        Ok(())
    }

    /// Enumerates all `n_actions^n_states` deterministic policies in
    /// lexicographic order. Intended for small oracle instances.
    pub fn enumerate_all(n_states: usize, n_actions: usize) -> Vec<StationaryPolicy> {
        let total = n_actions.checked_pow(n_states as u32).expect("policy space overflow");
        let mut out = Vec::with_capacity(total);
        let mut actions = vec![0usize; n_states];
        loop {
            out.push(StationaryPolicy::new(actions.clone()));
            // increment most-significant digit last so ordering is lexicographic
            let mut pos = n_states;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                actions[pos] += 1;
                if actions[pos] < n_actions {
                    break;
                }
                actions[pos] = 0;
            }
        }
    }
}

/// Competition class of policies for the optimal-policy search.
#[derive(Debug, Clone)]
pub enum PolicyClass {
    /// All deterministic stationary policies.
    All,
    /// An explicit restricted class, scored policy by policy.
    Explicit(Vec<StationaryPolicy>),
}

/// Markov chain obtained by fixing a policy in an MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain<F> {
    n_states: usize,
    /// `transition[s1 * n_states + s2] = p(s1, c(s1), s2)`
    transition: Vec<F>,
    /// `step_reward[s] = r(s, c(s))`
    step_reward: Vec<F>,
}

impl<F: Float> InducedChain<F> {
    /// Builds a chain directly from a transition table and per-state rewards.
    pub fn from_parts(transition: Vec<F>, step_reward: Vec<F>) -> Result<Self> {
        let n = step_reward.len();
        if transition.len() != n * n {
            return Err(Error::config("transition table shape mismatch"));
        }
        let tol = F::spec_tol(KERNEL_ROW_TOL);
        for s in 0..n {
            let sum: F = transition[s * n..(s + 1) * n].iter().copied().sum();
            if (sum - F::one()).abs() > tol {
                return Err(Error::config(format!("chain row {s} sums to {sum}, not 1")));
            }
        }
        Ok(Self { n_states: n, transition, step_reward })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn prob(&self, s1: usize, s2: usize) -> F {
        self.transition[s1 * self.n_states + s2]
    }

    #[inline]
    pub fn row(&self, s1: usize) -> &[F] {
        &self.transition[s1 * self.n_states..][..self.n_states]
    }

    #[inline]
    pub fn step_reward(&self, s: usize) -> F {
        self.step_reward[s]
    }

    /// Stationary distribution `π` with `πQ = π`, `Σπ = 1`.
    ///
    /// Solves the linear system directly up to
    /// [`DIRECT_SOLVE_MAX_STATES`] states and falls back to power iteration
    /// above. The caller guarantees a single closed class; two or more closed
    /// classes surface as a precondition error.
    pub fn stationary_distribution(&self) -> Result<Vec<F>> {
        let n = self.n_states;
        let tol = F::spec_tol(STATIONARY_RESIDUAL_TOL);
        if n <= DIRECT_SOLVE_MAX_STATES {
            if let Ok(pi) = self.stationary_direct() {
                if self.stationary_residual(&pi) <= tol {
                    return Ok(pi);
                }
            }
        }
        // power-iteration fallback; also handles chains whose quasi-transient
        // states make the linear system numerically singular
        let pi = self.stationary_power()?;
        let residual = self.stationary_residual(&pi);
        if residual > tol {
            return Err(Error::numerical(
                "stationary distribution residual exceeds tolerance",
                residual.as_f64(),
            ));
        }
        // a fixed point of a multi-closed-class chain can be a mixture;
        // insist the support lies in one closed communicating class
        let support_tol = F::of(1e-9);
        let mode = pi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite mass"))
            .map(|(s, _)| s)
            .expect("non-empty");
        let class = self.reachable_from(mode);
        if !self.is_recurrent_from(mode)
            || pi.iter().enumerate().any(|(s, p)| *p > support_tol && !class[s])
        {
            return Err(Error::precondition(
                "chain has more than one closed class; stationary distribution not unique",
            ));
        }
        Ok(pi)
    }

    fn stationary_direct(&self) -> Result<Vec<F>> {
        let n = self.n_states;
        // (Qᵀ − I) π = 0 with the last equation replaced by Σπ = 1.
        let mut a = vec![F::zero(); n * n];
        let mut b = vec![F::zero(); n];
        for s1 in 0..n {
            for s2 in 0..n {
                a[s2 * n + s1] = self.prob(s1, s2);
            }
        }
        for s in 0..n {
            a[s * n + s] -= F::one();
        }
        for s in 0..n {
            a[(n - 1) * n + s] = F::one();
        }
        b[n - 1] = F::one();
        let pi = solve_linear(&mut a, &mut b, n)?;
        let neg_tol = F::of(-1e-9);
        if pi.iter().any(|p| *p < neg_tol) {
            return Err(Error::precondition(
                "stationary solve produced negative mass; chain is not unichain",
            ));
        }
        // clamp tiny negative round-off and renormalize
        let mut pi: Vec<F> = pi.into_iter().map(|p| p.max(F::zero())).collect();
        let total: F = pi.iter().copied().sum();
        for p in pi.iter_mut() {
            *p /= total;
        }
        Ok(pi)
    }

    fn stationary_power(&self) -> Result<Vec<F>> {
        let n = self.n_states;
        let mut pi = vec![F::one() / F::of(n as f64); n];
        let mut next = vec![F::zero(); n];
        let tol = F::spec_tol(STATIONARY_RESIDUAL_TOL);
        let max_iters = 5_000_000usize;
        for _ in 0..max_iters {
            for v in next.iter_mut() {
                *v = F::zero();
            }
            for s1 in 0..n {
                let w = pi[s1];
                if w == F::zero() {
                    continue;
                }
                for (s2, p) in self.row(s1).iter().enumerate() {
                    next[s2] += w * *p;
                }
            }
            let mut diff = F::zero();
            for s in 0..n {
                diff = diff.max((next[s] - pi[s]).abs());
            }
            std::mem::swap(&mut pi, &mut next);
            if diff <= tol {
                let total: F = pi.iter().copied().sum();
                for p in pi.iter_mut() {
                    *p /= total;
                }
                return Ok(pi);
            }
        }
        Err(Error::numerical(
            format!("power iteration did not converge in {max_iters} iterations"),
            self.stationary_residual(&pi).as_f64(),
        ))
    }

    fn stationary_residual(&self, pi: &[F]) -> F {
        let n = self.n_states;
        let mut residual = F::zero();
        for s2 in 0..n {
            let mut acc = F::zero();
            for s1 in 0..n {
                acc += pi[s1] * self.prob(s1, s2);
            }
            residual = residual.max((acc - pi[s2]).abs());
        }
        residual
    }

    /// Joint stationary probability of `s1` immediately followed by `s2`:
    /// entry `(s1, s2)` is `π(s1) · q(s1, s2)`, returned row-major.
    pub fn pair_stationary(&self) -> Result<Vec<F>> {
        let pi = self.stationary_distribution()?;
        let n = self.n_states;
        let mut pair = vec![F::zero(); n * n];
        for s1 in 0..n {
            for s2 in 0..n {
                pair[s1 * n + s2] = pi[s1] * self.prob(s1, s2);
            }
        }
        Ok(pair)
    }

    /// Expected first return time to `s0`, via Kac's formula `1/π(s0)`.
    pub fn expected_return_time(&self, s0: usize) -> Result<F> {
        if s0 >= self.n_states {
            return Err(Error::config(format!("state {s0} out of range")));
        }
        let pi = self.stationary_distribution()?;
        if pi[s0] <= F::zero() {
            return Err(Error::precondition(format!(
                "state {s0} has zero stationary mass (transient)"
            )));
        }
        Ok(F::one() / pi[s0])
    }

    /// Long-run average reward `Σ_s π(s) r(s, c(s))`.
    pub fn gain(&self) -> Result<F> {
        let pi = self.stationary_distribution()?;
        Ok(pi.iter().zip(&self.step_reward).map(|(p, r)| *p * *r).sum())
    }

    /// Jointly solves the average-reward evaluation equations
    /// `g + h(s) = r(s) + Σ_{s'} q(s, s') h(s')`, returning `(g, h)` with
    /// `h` normalized to `h(0) = 0`. Unlike the stationary-distribution
    /// route this stays well-posed when transient states carry vanishing
    /// mass, provided the pinned reference sits inside the recurrent core;
    /// the reference is located by a short power iteration, so chains whose
    /// mass lives far from state 0 stay solvable.
    pub fn evaluate(&self) -> Result<(F, Vec<F>)> {
        let first = self.mass_mode(128);
        let mut attempt = self.evaluate_with_reference(first);
        if attempt.is_err() {
            for fallback in [self.mass_mode(4096), 0] {
                if fallback != first {
                    attempt = self.evaluate_with_reference(fallback);
                    if attempt.is_ok() {
                        break;
                    }
                }
            }
        }
        let (gain, mut bias) = attempt?;
        let offset = bias[0];
        for h in bias.iter_mut() {
            *h -= offset;
        }
        Ok((gain, bias))
    }

    fn evaluate_with_reference(&self, reference: usize) -> Result<(F, Vec<F>)> {
        let n = self.n_states;
        // unknowns: x[0] = g, x[s] = h(s) for s != reference, packed so the
        // reference's slot holds h of state 0 when reference != 0
        let slot_of = |s: usize| -> Option<usize> {
            if s == reference {
                None
            } else if s == 0 {
                Some(reference.max(1))
            } else {
                Some(s)
            }
        };
        let mut a = vec![F::zero(); n * n];
        let mut b = vec![F::zero(); n];
        for s in 0..n {
            a[s * n] = F::one();
            for s2 in 0..n {
                if let Some(col) = slot_of(s2) {
                    let mut coeff = -self.prob(s, s2);
                    if s2 == s {
                        coeff += F::one();
                    }
                    a[s * n + col] = coeff;
                }
            }
            b[s] = self.step_reward[s];
        }
        let x = solve_linear(&mut a, &mut b, n)?;
        let gain = x[0];
        let mut bias = vec![F::zero(); n];
        for s in 0..n {
            if let Some(col) = slot_of(s) {
                bias[s] = x[col];
            }
        }
        Ok((gain, bias))
    }

    /// State carrying the most mass after `sweeps` power-iteration steps
    /// from the uniform distribution; a cheap guess at the recurrent core.
    fn mass_mode(&self, sweeps: usize) -> usize {
        let n = self.n_states;
        if n == 1 {
            return 0;
        }
        let mut v = vec![F::one() / F::of(n as f64); n];
        let mut next = vec![F::zero(); n];
        for _ in 0..sweeps {
            for x in next.iter_mut() {
                *x = F::zero();
            }
            for s1 in 0..n {
                let w = v[s1];
                if w == F::zero() {
                    continue;
                }
                for (s2, p) in self.row(s1).iter().enumerate() {
                    next[s2] += w * *p;
                }
            }
            std::mem::swap(&mut v, &mut next);
        }
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite mass"))
            .map(|(s, _)| s)
            .unwrap_or(0)
    }

    /// Bias (relative value) vector of this chain for a known gain, solving
    /// `(I − Q) h = r − g·1` with `h(0) = 0`.
    pub fn bias(&self, gain: F) -> Result<Vec<F>> {
        let n = self.n_states;
        let mut a = vec![F::zero(); n * n];
        let mut b = vec![F::zero(); n];
        for s1 in 0..n {
            for s2 in 0..n {
                a[s1 * n + s2] = -self.prob(s1, s2);
            }
            a[s1 * n + s1] += F::one();
            b[s1] = self.step_reward[s1] - gain;
        }
        // pin h(0) = 0 to make the system non-singular
        for s2 in 0..n {
            a[s2] = F::zero();
        }
        a[0] = F::one();
        b[0] = F::zero();
        solve_linear(&mut a, &mut b, n)
    }

    /// Expected hitting times to `target` from every state in `target`'s
    /// closed communicating class, solving `h = 1 + Q_{-target} h`. Entries
    /// outside the class are `+inf`; `h(target) = 0`.
    pub fn expected_hitting_times(&self, target: usize) -> Result<Vec<F>> {
        if target >= self.n_states {
            return Err(Error::config(format!("state {target} out of range")));
        }
        if !self.is_recurrent_from(target) {
            return Err(Error::precondition(format!(
                "state {target} is not in a closed communicating class"
            )));
        }
        let class = self.reachable_from(target);
        let members: Vec<usize> =
            (0..self.n_states).filter(|&s| class[s] && s != target).collect();
        let m = members.len();
        let mut a = vec![F::zero(); m * m];
        let mut b = vec![F::one(); m];
        for (i, &s) in members.iter().enumerate() {
            for (j, &s2) in members.iter().enumerate() {
                a[i * m + j] = -self.prob(s, s2);
            }
            a[i * m + i] += F::one();
        }
        let h = if m > 0 { solve_linear(&mut a, &mut b, m)? } else { Vec::new() };
        let mut out = vec![F::infinity(); self.n_states];
        out[target] = F::zero();
        for (&s, value) in members.iter().zip(&h) {
            out[s] = *value;
        }
        Ok(out)
    }

    /// States reachable from `from` through positive-probability transitions.
    pub fn reachable_from(&self, from: usize) -> Vec<bool> {
        let n = self.n_states;
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(s) = stack.pop() {
            for (s2, p) in self.row(s).iter().enumerate() {
                if *p > F::zero() && !seen[s2] {
                    seen[s2] = true;
                    stack.push(s2);
                }
            }
        }
        seen
    }

    /// True when `s0` lies in a closed communicating class of the chain:
    /// every state reachable from `s0` can reach it back.
    pub fn is_recurrent_from(&self, s0: usize) -> bool {
        let forward = self.reachable_from(s0);
        (0..self.n_states)
            .filter(|&s| forward[s])
            .all(|s| self.reachable_from(s)[s0])
    }
}

/// Result of an optimal-policy computation.
#[derive(Debug, Clone)]
pub struct GainResult<F> {
    /// Long-run average reward per step of the returned policy.
    pub gain: F,
    /// Relative values, one per state, with state 0 as reference.
    pub bias: Vec<F>,
    /// The maximizing policy.
    pub policy: StationaryPolicy,
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2-state fixture used throughout: p(0,0,1)=0.3, p(1,0,0)=0.6.
    fn two_state_chain() -> InducedChain<f64> {
        InducedChain::<f64>::from_parts(vec![0.7, 0.3, 0.6, 0.4], vec![0.0, 3.0]).unwrap()
    }

    fn two_state_mdp() -> FiniteMdp<f64> {
        FiniteMdp::<f64>::new(2, 1, vec![0.0, 3.0], vec![0.7, 0.3, 0.6, 0.4]).unwrap()
    }

    #[test]
    fn induce_is_a_table_lookup() {
        let mdp = two_state_mdp();
        let chain = mdp.induce(&StationaryPolicy::constant(2, 0)).unwrap();
        assert_eq!(chain.row(0), &[0.7, 0.3]);
        assert_eq!(chain.row(1), &[0.6, 0.4]);
        assert_eq!(chain.step_reward(0), 0.0);
        assert_eq!(chain.step_reward(1), 3.0);
    }

    #[test]
    fn induce_identity_kernel_gives_identity_chain() {
        let n = 3;
        let mut kernel = vec![0.0; n * 2 * n];
        for s in 0..n {
            for a in 0..2 {
                kernel[(s * 2 + a) * n + s] = 1.0;
            }
        }
        let mdp = FiniteMdp::<f64>::new(n, 2, vec![1.0; n * 2], kernel).unwrap();
        let chain = mdp.induce(&StationaryPolicy::constant(n, 1)).unwrap();
        for s in 0..n {
            for s2 in 0..n {
                assert_eq!(chain.prob(s, s2), if s == s2 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn induce_rejects_dimension_mismatch() {
        let mdp = two_state_mdp();
        assert!(matches!(
            mdp.induce(&StationaryPolicy::constant(3, 0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            mdp.induce(&StationaryPolicy::constant(2, 5)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn stationary_matches_detailed_balance_solution() {
        // π0 · 0.3 = π1 · 0.6  ->  π = (2/3, 1/3)
        let pi = two_state_chain().stationary_distribution().unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_of_doubly_stochastic_chain_is_uniform() {
        let chain = InducedChain::<f64>::from_parts(vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 0.0]).unwrap();
        let pi = chain.stationary_distribution().unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
        assert!((pi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_of_birth_death_chain_is_geometric() {
        // up-rate 0.2, down-rate 0.4: π ∝ (1, 1/2, 1/4) = (4/7, 2/7, 1/7)
        let chain = InducedChain::<f64>::from_parts(
            vec![0.8, 0.2, 0.0, 0.4, 0.4, 0.2, 0.0, 0.4, 0.6],
            vec![0.0; 3],
        )
        .unwrap();
        let pi = chain.stationary_distribution().unwrap();
        assert!((pi[0] - 4.0 / 7.0).abs() < 1e-12);
        assert!((pi[1] - 2.0 / 7.0).abs() < 1e-12);
        assert!((pi[2] - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_rejects_two_closed_classes() {
        let chain = InducedChain::<f64>::from_parts(
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.5],
            vec![0.0; 3],
        )
        .unwrap();
        assert!(chain.stationary_distribution().is_err());
    }

    #[test]
    fn pair_stationary_matches_hand_product_and_marginalizes() {
        let chain = two_state_chain();
        let pair = chain.pair_stationary().unwrap();
        assert!((pair[1] - (2.0 / 3.0) * 0.3).abs() < 1e-12); // pair(0,1) = 0.2
        let pi = chain.stationary_distribution().unwrap();
        for s1 in 0..2 {
            let marginal: f64 = (0..2).map(|s2| pair[s1 * 2 + s2]).sum();
            assert!((marginal - pi[s1]).abs() < 1e-12);
        }
        let total: f64 = pair.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_stationary_single_state() {
        let chain = InducedChain::<f64>::from_parts(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(chain.pair_stationary().unwrap(), vec![1.0]);
    }

    #[test]
    fn return_time_is_kac_reciprocal() {
        let chain = two_state_chain();
        assert!((chain.expected_return_time(0).unwrap() - 1.5).abs() < 1e-12);
        let single = InducedChain::<f64>::from_parts(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(single.expected_return_time(0).unwrap(), 1.0);
    }

    #[test]
    fn return_time_rejects_transient_state() {
        // state 1 is transient: it leaks to state 0 and never returns
        let chain =
            InducedChain::<f64>::from_parts(vec![1.0, 0.0, 0.5, 0.5], vec![0.0, 0.0]).unwrap();
        assert!(chain.expected_return_time(1).is_err());
    }

    #[test]
    fn gain_is_stationary_weighted_reward() {
        assert!((two_state_chain().gain().unwrap() - 1.0).abs() < 1e-12);
        let constant =
            InducedChain::<f64>::from_parts(vec![0.5, 0.5, 0.9, 0.1], vec![2.5, 2.5]).unwrap();
        assert!((constant.gain().unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn optimal_policy_single_state_picks_best_reward() {
        let mdp = FiniteMdp::<f64>::new(1, 2, vec![1.0, 5.0], vec![1.0, 1.0]).unwrap();
        let result = mdp.optimal_policy(&PolicyClass::All).unwrap();
        assert_eq!(result.policy.action(0), 1);
        assert!((result.gain - 5.0).abs() < 1e-10);
    }

    #[test]
    fn optimal_policy_explicit_class_scores_exactly() {
        let mdp = two_state_mdp();
        let class = PolicyClass::Explicit(vec![StationaryPolicy::constant(2, 0)]);
        let result = mdp.optimal_policy(&class).unwrap();
        assert!((result.gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gain_invariant_under_reference_choice() {
        // re-solving after permuting which state is "state 0" leaves the gain
        // unchanged (the solver's reference is positional)
        let mdp = FiniteMdp::<f64>::new(
            2,
            2,
            vec![1.0, 0.0, 4.0, 2.0],
            vec![0.7, 0.3, 0.2, 0.8, 0.6, 0.4, 0.5, 0.5],
        )
        .unwrap();
        let g1 = mdp.optimal_policy(&PolicyClass::All).unwrap().gain;
        // swap state labels 0 <-> 1
        let perm = |s: usize| 1 - s;
        let mut reward = vec![0.0; 4];
        let mut kernel = vec![0.0; 8];
        for s in 0..2 {
            for a in 0..2 {
                reward[perm(s) * 2 + a] = mdp.reward(s, a);
                for s2 in 0..2 {
                    kernel[(perm(s) * 2 + a) * 2 + perm(s2)] = mdp.prob(s, a, s2);
                }
            }
        }
        let swapped = FiniteMdp::<f64>::new(2, 2, reward, kernel).unwrap();
        let g2 = swapped.optimal_policy(&PolicyClass::All).unwrap().gain;
        assert!((g1 - g2).abs() < 1e-9);
    }

    #[test]
    fn t_step_value_base_case_and_single_state() {
        let mdp = two_state_mdp();
        let policy = StationaryPolicy::constant(2, 0);
        assert_eq!(mdp.t_step_value(&policy, 0, 1).unwrap(), 3.0);
        let single = FiniteMdp::<f64>::new(1, 1, vec![2.0], vec![1.0]).unwrap();
        let policy1 = StationaryPolicy::constant(1, 0);
        for t in [0usize, 1, 7, 100] {
            let h = single.t_step_value(&policy1, t, 0).unwrap();
            assert!((h - 2.0 * (t as f64 + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn t_step_value_per_step_average_approaches_gain() {
        let mdp = two_state_mdp();
        let policy = StationaryPolicy::constant(2, 0);
        let chain = mdp.induce(&policy).unwrap();
        let gain = chain.gain().unwrap();
        let t = 10_000usize;
        let h = mdp.t_step_value(&policy, t, 0).unwrap();
        assert!((h / t as f64 - gain).abs() < 0.01);
        // sharper bound driven by the bias span
        let bias = chain.bias(gain).unwrap();
        let span = bias.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - bias.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((h / t as f64 - gain).abs() < 10.0 * span.max(1.0) / t as f64);
    }

    #[test]
    fn policy_enumeration_is_lexicographic_and_complete() {
        let all = StationaryPolicy::enumerate_all(2, 3);
        assert_eq!(all.len(), 9);
        assert_eq!(all[0].actions(), &[0, 0]);
        assert_eq!(all[1].actions(), &[0, 1]);
        assert_eq!(all[8].actions(), &[2, 2]);
    }

    #[test]
    fn mdp_json_round_trip_and_schema_shape() {
        let mdp = two_state_mdp();
        let json = serde_json::to_value(&mdp).unwrap();
        assert_eq!(json["n_states"], 2);
        assert_eq!(json["reward"][1][0], 3.0);
        assert_eq!(json["kernel"][0][0][1], 0.3);
        let back: FiniteMdp<f64> = serde_json::from_value(json).unwrap();
        assert_eq!(back, mdp);
    }

    #[test]
    fn mdp_json_rejects_bad_rows() {
        let bad = serde_json::json!({
            "n_states": 1, "n_actions": 1,
            "reward": [[0.0]],
            "kernel": [[[0.5]]],
        });
        assert!(serde_json::from_value::<FiniteMdp<f64>>(bad).is_err());
    }

    #[test]
    fn recurrence_check_sees_closed_class() {
        // state 2 drains into the closed class {0, 1}
        let chain = InducedChain::<f64>::from_parts(
            vec![0.5, 0.5, 0.0, 0.4, 0.6, 0.0, 0.3, 0.3, 0.4],
            vec![0.0; 3],
        )
        .unwrap();
        assert!(chain.is_recurrent_from(0));
        assert!(!chain.is_recurrent_from(2));
    }

    #[test]
    fn generic_scalar_compiles_for_f32() {
        let chain =
            InducedChain::<f32>::from_parts(vec![0.7, 0.3, 0.6, 0.4], vec![0.0, 3.0]).unwrap();
        let pi = chain.stationary_distribution().unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-5);
    }
}
