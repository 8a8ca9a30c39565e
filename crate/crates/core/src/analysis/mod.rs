//! Information-geometric analysis of a parameter grid around a true model:
//! marginal KL divergences, decision regions, resolvability, the
//! regret-scaling-constant optimization and its explicit upper bound, plus a
//! diagnostic comparing the realized posterior against its large-sample
//! approximation.

mod regret;
mod simplex;

pub use regret::{regret_constant, verify_witness, RegretConstant, MAX_STAGES};

use serde::{Deserialize, Serialize};

use crate::agents::{EpochLedger, PolicySolutions};
use crate::error::{Error, Result};
use crate::families::ParamGrid;
use crate::mdp::{FiniteMdp, PolicyClass, StationaryPolicy};
use crate::scalar::Float;

/// Analysis knobs: the slack `epsilon` of the scaling constant, the region
/// split threshold `epsilon_prime`, and the prior decay exponent `a4`.
///
/// Defaults are the finite-grid regime: `epsilon = 0.1`, `epsilon_prime = 0`,
/// `a4 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig<F> {
    pub epsilon: F,
    pub epsilon_prime: F,
    pub a4: F,
}

impl<F: Float> Default for AnalysisConfig<F> {
    fn default() -> Self {
        Self { epsilon: F::of(0.1), epsilon_prime: F::zero(), a4: F::zero() }
    }
}

impl<F: Float> AnalysisConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > F::zero() && self.epsilon < F::one()) {
            return Err(Error::config("epsilon must lie in (0, 1)"));
        }
        if self.epsilon_prime < F::zero() {
            return Err(Error::config("epsilon_prime must be nonnegative"));
        }
        if self.a4 < F::zero() {
            return Err(Error::config("a4 must be nonnegative"));
        }
        Ok(())
    }

    /// The elimination threshold constant `K = (1+a4)(1+eps)/(1-eps)`.
    pub fn target_constant(&self) -> F {
        (F::one() + self.a4) * (F::one() + self.epsilon) / (F::one() - self.epsilon)
    }
}

/// Matrix of marginal KL divergences `D_c(theta_star || theta)`, one row per
/// grid point, one column per realized policy. Entries may be `+inf` when a
/// candidate kernel is not absolutely continuous w.r.t. the true one on the
/// relevant rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KlProfile<F> {
    n_points: usize,
    n_policies: usize,
    d: Vec<F>,
}

impl<F: Float> KlProfile<F> {
    pub fn new(n_points: usize, n_policies: usize, d: Vec<F>) -> Result<Self> {
        if d.len() != n_points * n_policies {
            return Err(Error::config("KL profile shape mismatch"));
        }
        if d.iter().any(|v| *v < F::zero() || v.is_nan()) {
            return Err(Error::config("KL profile entries must be nonnegative"));
        }
        Ok(Self { n_points, n_policies, d })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    #[inline]
    pub fn value(&self, point: usize, policy: usize) -> F {
        self.d[point * self.n_policies + policy]
    }

    pub fn row(&self, point: usize) -> &[F] {
        &self.d[point * self.n_policies..][..self.n_policies]
    }

    pub fn has_infinite_entries(&self) -> bool {
        self.d.iter().any(|v| v.is_infinite())
    }
}

/// Partition of the grid into decision regions `S_c`, with each region split
/// into the near-indistinguishable part `S_c'` (divergence under the true
/// optimal policy at most `epsilon_prime`) and the separated remainder
/// `S_c''`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRegions {
    /// Grid point -> realized policy index of its optimal policy.
    pub region_of: Vec<usize>,
    /// Realized policy index of the true model's optimal policy.
    pub c_star: usize,
    /// Per-policy list of grid points in `S_c'`.
    pub s_prime: Vec<Vec<usize>>,
    /// Per-policy list of grid points in `S_c''`.
    pub s_double_prime: Vec<Vec<usize>>,
}

/// Regions, profile and the realized policy set for one grid-versus-truth
/// analysis, together with the config that split the regions.
#[derive(Debug, Clone)]
pub struct RegionAnalysis<F> {
    pub regions: DecisionRegions,
    pub profile: KlProfile<F>,
    pub policies: Vec<StationaryPolicy>,
    pub config: AnalysisConfig<F>,
}

/// Stationary-weighted marginal KL divergence between the transition kernels
/// of two MDPs under one policy:
/// `Σ_{s1} π^{(c)}(s1) · KL(p_true(s1, c(s1), ·) || p_other(s1, c(s1), ·))`.
///
/// The weights come from the stationary distribution of the policy in the
/// *true* MDP. Uses the `0 log 0 = 0` convention; a zero in the candidate
/// row where the true row is positive yields `+inf`.
pub fn marginal_kl<F: Float>(
    true_mdp: &FiniteMdp<F>,
    other_mdp: &FiniteMdp<F>,
    policy: &StationaryPolicy,
) -> Result<F> {
    if true_mdp.n_states() != other_mdp.n_states()
        || true_mdp.n_actions() != other_mdp.n_actions()
    {
        return Err(Error::config("MDPs must share state and action spaces"));
    }
    let chain = true_mdp.induce(policy)?;
    let pi = chain.stationary_distribution()?;
    Ok(weighted_row_kl(true_mdp, other_mdp, policy, &pi))
}

fn weighted_row_kl<F: Float>(
    true_mdp: &FiniteMdp<F>,
    other_mdp: &FiniteMdp<F>,
    policy: &StationaryPolicy,
    pi: &[F],
) -> F {
    let mut total = F::zero();
    for s1 in 0..true_mdp.n_states() {
        if pi[s1] == F::zero() {
            continue;
        }
        let a = policy.action(s1);
        let true_row = true_mdp.kernel_row(s1, a);
        let other_row = other_mdp.kernel_row(s1, a);
        let mut kl = F::zero();
        for (p, q) in true_row.iter().zip(other_row) {
            if *p > F::zero() {
                if *q <= F::zero() {
                    return F::infinity();
                }
                kl += *p * (*p / *q).ln();
            }
        }
        // row KL is nonnegative in exact arithmetic; clamp round-off
        total += pi[s1] * kl.max(F::zero());
    }
    total
}

/// Computes decision regions and the KL profile of a grid against the model
/// at `true_index`, solving each grid point against `policy_class`.
pub fn decision_regions<F: Float>(
    grid: &ParamGrid<F>,
    true_index: usize,
    config: AnalysisConfig<F>,
    policy_class: &PolicyClass,
) -> Result<RegionAnalysis<F>> {
    if true_index >= grid.len() {
        return Err(Error::config(format!("true index {true_index} out of range")));
    }
    let true_mdp = grid.mdp(true_index).clone();
    let solutions = PolicySolutions::solve(&true_mdp, grid, policy_class)?;
    region_analysis_from_solutions(grid, &true_mdp, &solutions, config)
}

/// Same as [`decision_regions`] but reusing already-solved per-point optimal
/// policies, so region indices agree with an agent's ledger.
pub fn region_analysis_from_solutions<F: Float>(
    grid: &ParamGrid<F>,
    true_mdp: &FiniteMdp<F>,
    solutions: &PolicySolutions<F>,
    config: AnalysisConfig<F>,
) -> Result<RegionAnalysis<F>> {
    config.validate()?;
    let n_policies = solutions.n_policies();
    let n_points = grid.len();

    // stationary weights of every realized policy under the true model
    let mut weights = Vec::with_capacity(n_policies);
    for policy in &solutions.policies {
        let chain = true_mdp.induce(policy)?;
        weights.push(chain.stationary_distribution()?);
    }

    let mut d = vec![F::zero(); n_points * n_policies];
    for point in 0..n_points {
        let other = grid.mdp(point);
        for (c, policy) in solutions.policies.iter().enumerate() {
            d[point * n_policies + c] = weighted_row_kl(true_mdp, other, policy, &weights[c]);
        }
    }
    let profile = KlProfile::new(n_points, n_policies, d)?;

    let c_star = solutions.c_star;
    let mut s_prime = vec![Vec::new(); n_policies];
    let mut s_double_prime = vec![Vec::new(); n_policies];
    for point in 0..n_points {
        let c = solutions.region_of[point];
        if profile.value(point, c_star) <= config.epsilon_prime {
            s_prime[c].push(point);
        } else {
            s_double_prime[c].push(point);
        }
    }

    Ok(RegionAnalysis {
        regions: DecisionRegions {
            region_of: solutions.region_of.clone(),
            c_star,
            s_prime,
            s_double_prime,
        },
        profile,
        policies: solutions.policies.clone(),
        config,
    })
}

impl<F: Float> RegionAnalysis<F> {
    /// Builds an analysis from raw region/profile data (synthetic instances).
    pub fn from_raw(
        profile: KlProfile<F>,
        region_of: Vec<usize>,
        c_star: usize,
        config: AnalysisConfig<F>,
    ) -> Result<Self> {
        config.validate()?;
        if region_of.len() != profile.n_points() {
            return Err(Error::config("region assignment length mismatch"));
        }
        let n_policies = profile.n_policies();
        if c_star >= n_policies || region_of.iter().any(|&c| c >= n_policies) {
            return Err(Error::config("policy index out of range"));
        }
        let mut s_prime = vec![Vec::new(); n_policies];
        let mut s_double_prime = vec![Vec::new(); n_policies];
        for (point, &c) in region_of.iter().enumerate() {
            if profile.value(point, c_star) <= config.epsilon_prime {
                s_prime[c].push(point);
            } else {
                s_double_prime[c].push(point);
            }
        }
        let policies = Vec::new();
        Ok(Self {
            regions: DecisionRegions { region_of, c_star, s_prime, s_double_prime },
            profile,
            policies,
            config,
        })
    }

    /// Iterates over suboptimal policies (everything except the optimum).
    pub fn suboptimal_policies(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.profile.n_policies()).filter(move |&c| c != self.regions.c_star)
    }

    /// True when some grid point's optimal policy differs from the truth's.
    pub fn has_suboptimal_points(&self) -> bool {
        self.regions.region_of.iter().any(|&c| c != self.regions.c_star)
    }
}

/// Minimum resolvability of suboptimal actions: the smallest own-policy
/// divergence among near-region points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMin<F> {
    /// No suboptimal policy has any point in its near region `S_c'`; the
    /// log-horizon term of the regret bound is vacuous.
    NoSuboptimalNearPoints,
    /// Some near-region point has zero own-policy divergence, so the scaling
    /// constant optimization has value infinity.
    Zero { point: usize, policy: usize },
    Positive(F),
}

/// Computes `min_{c != c*} min_{theta in S_c'} D_c(theta_star || theta)`.
pub fn epsilon_min<F: Float>(analysis: &RegionAnalysis<F>) -> EpsilonMin<F> {
    let mut best: Option<(F, usize, usize)> = None;
    for c in analysis.suboptimal_policies() {
        for &point in &analysis.regions.s_prime[c] {
            let v = analysis.profile.value(point, c);
            if best.map_or(true, |(b, _, _)| v < b) {
                best = Some((v, point, c));
            }
        }
    }
    match best {
        None => EpsilonMin::NoSuboptimalNearPoints,
        Some((v, point, policy)) if v <= F::zero() => EpsilonMin::Zero { point, policy },
        Some((v, _, _)) => EpsilonMin::Positive(v),
    }
}

/// Result of verifying the shared-divergence certificate `(Delta, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem4Bound<F> {
    pub bound: f64,
    pub delta_tilde: F,
    pub delta: F,
    pub l_coords: usize,
}

/// Explicit upper bound on the scaling constant from a shared-divergence
/// certificate: if every near-region point has at least `l_coords`
/// suboptimal coordinates of its divergence vector at least `delta`, then
/// the constant is at most
/// `((|C| − L) / delta_tilde) · 2 (1+a4)(1+eps)/(1−eps)` with
/// `delta_tilde = min(delta, epsilon_min)`.
pub fn theorem4_bound<F: Float>(
    analysis: &RegionAnalysis<F>,
    delta: F,
    l_coords: usize,
) -> Result<Theorem4Bound<F>> {
    let n_policies = analysis.profile.n_policies();
    if delta <= F::zero() {
        return Err(Error::config("delta must be positive"));
    }
    if l_coords > n_policies.saturating_sub(1) {
        return Err(Error::config(format!(
            "certificate asks for {l_coords} coordinates but only {} are suboptimal",
            n_policies - 1
        )));
    }

    // verify the certificate, collecting violations
    let mut violations = Vec::new();
    for c in analysis.suboptimal_policies() {
        for &point in &analysis.regions.s_prime[c] {
            let count = analysis
                .suboptimal_policies()
                .filter(|&chat| analysis.profile.value(point, chat) >= delta)
                .count();
            if count < l_coords {
                violations.push((point, count));
            }
        }
    }
    if !violations.is_empty() {
        let listed: Vec<String> = violations
            .iter()
            .take(16)
            .map(|(p, n)| format!("(point {p}: {n} coordinates)"))
            .collect();
        return Err(Error::Validation(format!(
            "certificate (delta, L={l_coords}) fails at {} points: {}",
            violations.len(),
            listed.join(", ")
        )));
    }

    let eps_min = match epsilon_min(analysis) {
        EpsilonMin::Positive(v) => v,
        EpsilonMin::Zero { .. } => F::zero(),
        EpsilonMin::NoSuboptimalNearPoints => F::infinity(),
    };
    let delta_tilde = delta.min(eps_min);
    if delta_tilde <= F::zero() {
        return Err(Error::InfiniteConstant(
            "delta_tilde is zero: a near-region point has zero own-policy divergence".into(),
        ));
    }
    let cfg = &analysis.config;
    let factor = F::of(2.0) * cfg.target_constant();
    let bound = F::of((n_policies - l_coords) as f64) / delta_tilde * factor;
    Ok(Theorem4Bound { bound: bound.as_f64(), delta_tilde, delta, l_coords })
}

/// One grid point's deviation between the realized posterior log-ratio and
/// the divergence-driven approximation `−Σ_c V_c · D_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxDiagnosticRow<F> {
    pub point: usize,
    /// Realized `log(π_t(θ)/π_t(θ*)) − log(π_0(θ)/π_0(θ*))`.
    pub actual_log_ratio: F,
    /// Predicted exponent `−Σ_c V_c(t) D_c(θ*||θ)` from realized play counts.
    pub predicted: F,
    pub discrepancy: F,
    /// Variant of `predicted` with `V_c` replaced by `N_c · τ̄_c`, when
    /// return times are supplied.
    pub predicted_expected_time: Option<F>,
}

/// Compares the maintained posterior against the large-sample approximation
/// at an epoch boundary; emitted for inspection, not asserted.
pub fn posterior_approx_diagnostic<F: Float>(
    ledger: &EpochLedger,
    log_weights: &[F],
    prior_log_weights: &[F],
    analysis: &RegionAnalysis<F>,
    true_index: usize,
    return_times: Option<&[F]>,
) -> Result<Vec<ApproxDiagnosticRow<F>>> {
    let profile = &analysis.profile;
    if ledger.n_policies() != profile.n_policies() {
        return Err(Error::config("ledger and profile disagree on the policy set"));
    }
    if log_weights.len() != profile.n_points() || prior_log_weights.len() != profile.n_points() {
        return Err(Error::config("log-weight vectors must align with the grid"));
    }
    if true_index >= profile.n_points() {
        return Err(Error::config("true index out of range"));
    }
    if let Some(tb) = return_times {
        if tb.len() != profile.n_policies() {
            return Err(Error::config("return-time vector must align with the policy set"));
        }
    }
    let base_now = log_weights[true_index];
    let base_prior = prior_log_weights[true_index];
    let rows = (0..profile.n_points())
        .map(|point| {
            let actual =
                (log_weights[point] - base_now) - (prior_log_weights[point] - base_prior);
            let mut predicted = F::zero();
            for c in 0..profile.n_policies() {
                let steps = F::of(ledger.steps_per_policy[c] as f64);
                predicted -= steps * profile.value(point, c);
            }
            let predicted_expected_time = return_times.map(|tb| {
                let mut acc = F::zero();
                for c in 0..profile.n_policies() {
                    let epochs = F::of(ledger.epochs_per_policy[c] as f64);
                    acc -= epochs * tb[c] * profile.value(point, c);
                }
                acc
            });
            ApproxDiagnosticRow {
                point,
                actual_log_ratio: actual,
                predicted,
                discrepancy: (actual - predicted).abs(),
                predicted_expected_time,
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{
        build_two_server_mdp, grid_prior, FamilyKind, QueueConfig, TwoServerParams,
    };
    use crate::mdp::FiniteMdp;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> QueueConfig<f64> {
        QueueConfig {
            capacity: 6,
            mu_slow: 0.2,
            mu_fast: 0.7,
            cost_slow: 0.0,
            cost_fast: 6.0,
            holding_cost: 1.0,
            service_reward: 20.0,
            lambda_cap: 0.9,
        }
    }

    fn single_policy_mdp(rows: [[f64; 2]; 2]) -> FiniteMdp<f64> {
        FiniteMdp::new(
            2,
            1,
            vec![0.0, 0.0],
            vec![rows[0][0], rows[0][1], rows[1][0], rows[1][1]],
        )
        .unwrap()
    }

    #[test]
    fn marginal_kl_zero_on_self() {
        let config = small_config();
        let mdp = build_two_server_mdp(&TwoServerParams { theta: 0.4 }, &config).unwrap();
        for a in 0..2 {
            let policy = StationaryPolicy::constant(7, a);
            let d = marginal_kl(&mdp, &mdp, &policy).unwrap();
            assert!(d.abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_kl_matches_hand_computed_two_state_value() {
        let truth = single_policy_mdp([[0.7, 0.3], [0.6, 0.4]]);
        let other = single_policy_mdp([[0.5, 0.5], [0.5, 0.5]]);
        let policy = StationaryPolicy::constant(2, 0);
        let d = marginal_kl(&truth, &other, &policy).unwrap();
        let bern = |p: f64, q: f64| p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        let expected = (2.0 / 3.0) * bern(0.3, 0.5) + (1.0 / 3.0) * bern(0.6, 0.5);
        assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");
    }

    #[test]
    fn marginal_kl_infinite_on_support_violation() {
        let truth = single_policy_mdp([[0.7, 0.3], [0.6, 0.4]]);
        let other = single_policy_mdp([[1.0, 0.0], [0.5, 0.5]]);
        let policy = StationaryPolicy::constant(2, 0);
        let d = marginal_kl(&truth, &other, &policy).unwrap();
        assert!(d.is_infinite());
    }

    #[test]
    fn pinsker_lower_bound_on_random_two_server_pairs() {
        let config = small_config();
        // per-row Pinsker constants: interior rows differ by
        // |dθ|(1 + |2μ−1|) in L1, the full-queue row by 2μ|dθ| (the empty
        // row by 2|dθ|, never the minimum); the divergence is a stationary
        // mixture of rows, so the worst row constant bounds it below
        let a = [config.mu_slow, config.mu_fast]
            .iter()
            .map(|&m| (0.5 * (1.0 + (2.0 * m - 1.0).abs()).powi(2)).min(2.0 * m * m))
            .fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let t_star = 0.1 + 0.8 * rng.random::<f64>();
            let t_other = 0.1 + 0.8 * rng.random::<f64>();
            let truth = build_two_server_mdp(&TwoServerParams { theta: t_star }, &config).unwrap();
            let other =
                build_two_server_mdp(&TwoServerParams { theta: t_other }, &config).unwrap();
            let actions: Vec<usize> = (0..7).map(|_| rng.random_range(0..2usize)).collect();
            let policy = StationaryPolicy::new(actions);
            let d = marginal_kl(&truth, &other, &policy).unwrap();
            let gap = a * (t_star - t_other) * (t_star - t_other);
            assert!(d >= gap - 1e-12, "D {d} < a(dθ)^2 {gap}");
        }
    }

    fn two_server_analysis(
        axis: &[f64],
        true_idx: usize,
        config: AnalysisConfig<f64>,
    ) -> RegionAnalysis<f64> {
        let qc = small_config();
        let grid = grid_prior(FamilyKind::TwoServer, &[axis.to_vec()], &qc, (0.0, 1.0)).unwrap();
        decision_regions(&grid, true_idx, config, &PolicyClass::All).unwrap()
    }

    #[test]
    fn regions_partition_grid_and_split_consistently() {
        let axis: Vec<f64> = (1..=12).map(|i| 0.05 + 0.07 * i as f64).collect();
        let analysis = two_server_analysis(&axis, 5, AnalysisConfig::default());
        let n = analysis.profile.n_points();
        let mut seen = vec![false; n];
        for c in 0..analysis.profile.n_policies() {
            for &p in analysis.regions.s_prime[c].iter().chain(&analysis.regions.s_double_prime[c])
            {
                assert!(!seen[p], "point {p} in two regions");
                seen[p] = true;
                assert_eq!(analysis.regions.region_of[p], c);
            }
        }
        assert!(seen.iter().all(|&s| s));
        // profile row of the true point is all zeros
        for c in 0..analysis.profile.n_policies() {
            assert!(analysis.profile.value(5, c).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_prime_extremes_control_the_split() {
        let axis: Vec<f64> = (1..=12).map(|i| 0.05 + 0.07 * i as f64).collect();
        // zero threshold: only zero-divergence points in S'; the true point
        // is one of them
        let zero = two_server_analysis(&axis, 5, AnalysisConfig::default());
        let c_star = zero.regions.c_star;
        assert!(zero.regions.s_prime[c_star].contains(&5));
        // infinite threshold: S'' empty everywhere
        let cfg = AnalysisConfig { epsilon_prime: f64::INFINITY, ..Default::default() };
        let inf = two_server_analysis(&axis, 5, cfg);
        assert!(inf.regions.s_double_prime.iter().all(|v| v.is_empty()));
    }

    #[test]
    fn epsilon_min_brute_force_on_synthetic_profile() {
        // 3 points, 2 policies; c* = 1; all points in region 0
        let profile = KlProfile::new(3, 2, vec![0.5, 0.0, 0.9, 0.0, 0.7, 0.0]).unwrap();
        let cfg = AnalysisConfig { epsilon_prime: f64::INFINITY, ..Default::default() };
        let analysis = RegionAnalysis::from_raw(profile, vec![0, 0, 0], 1, cfg).unwrap();
        let brute = (0..3)
            .map(|p| analysis.profile.value(p, 0))
            .fold(f64::INFINITY, f64::min);
        match epsilon_min(&analysis) {
            EpsilonMin::Positive(v) => {
                assert_eq!(v, brute);
                assert_eq!(v, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn epsilon_min_zero_and_undefined_cases() {
        let cfg = AnalysisConfig { epsilon_prime: f64::INFINITY, ..Default::default() };
        let profile = KlProfile::new(2, 2, vec![0.0, 0.0, 0.4, 0.0]).unwrap();
        let analysis = RegionAnalysis::from_raw(profile, vec![0, 0], 1, cfg).unwrap();
        assert!(matches!(epsilon_min(&analysis), EpsilonMin::Zero { point: 0, policy: 0 }));

        let profile = KlProfile::new(1, 2, vec![0.0, 0.0]).unwrap();
        let analysis = RegionAnalysis::from_raw(profile, vec![1], 1, cfg).unwrap();
        assert!(matches!(epsilon_min(&analysis), EpsilonMin::NoSuboptimalNearPoints));
    }

    #[test]
    fn theorem4_formula_and_certificate() {
        // 2 points in suboptimal regions, 3 policies, c* = 2
        let d = vec![
            0.5, 0.3, 0.0, // point 0 (region 0)
            0.6, 0.2, 0.0, // point 1 (region 1)
        ];
        let profile = KlProfile::new(2, 3, d).unwrap();
        let cfg = AnalysisConfig { epsilon_prime: f64::INFINITY, ..Default::default() };
        let analysis = RegionAnalysis::from_raw(profile, vec![0, 1], 2, cfg).unwrap();
        let k = analysis.config.target_constant();

        // L = 2 requires both suboptimal coordinates >= delta; fails at 0.3
        assert!(matches!(theorem4_bound(&analysis, 0.4, 2), Err(Error::Validation(_))));
        // L = 1 certificate holds at delta = 0.5
        let b1 = theorem4_bound(&analysis, 0.5, 1).unwrap();
        let eps_min = 0.2;
        assert_eq!(b1.delta_tilde, eps_min);
        assert!((b1.bound - (3.0 - 1.0) / eps_min * 2.0 * k).abs() < 1e-12);
        // L = 0 is the decoupled worst case |C| / delta_tilde * 2K
        let b0 = theorem4_bound(&analysis, 0.5, 0).unwrap();
        assert!((b0.bound - 3.0 / eps_min * 2.0 * k).abs() < 1e-12);
        assert!(b1.bound < b0.bound);
        // oversize L rejected
        assert!(theorem4_bound(&analysis, 0.5, 3).is_err());
    }

    #[test]
    fn diagnostic_is_zero_at_time_zero() {
        let profile = KlProfile::new(2, 1, vec![0.0, 0.3]).unwrap();
        let cfg = AnalysisConfig { epsilon_prime: f64::INFINITY, ..Default::default() };
        let analysis = RegionAnalysis::from_raw(profile, vec![0, 0], 0, cfg).unwrap();
        let ledger = EpochLedger::new(1, 2);
        let prior = vec![0.2_f64.ln(), 0.8_f64.ln()];
        let rows =
            posterior_approx_diagnostic(&ledger, &prior, &prior, &analysis, 0, None).unwrap();
        for row in &rows {
            assert!(row.discrepancy.abs() < 1e-15);
        }
    }
}
