//! The regret-scaling-constant optimization.
//!
//! The constant solves a growth-path game over per-policy play counts:
//! choose an elimination ordering of the suboptimal policies and grow a
//! nonnegative count vector, subject to (a) a frozen coordinate for every
//! already-eliminated policy, (b) monotone growth, and (c) each stage ending
//! exactly when the least-resolved parameter in the stage policy's near
//! region reaches the threshold `K = (1+a4)(1+eps)/(1-eps)`. The objective
//! maximizes the final total count.
//!
//! The stage-ending conditions equate a *minimum* over near-region points
//! with `K`, which is nonconvex; fixing which point binds per stage makes
//! every remaining piece linear. The solver therefore enumerates injective
//! orderings and Pareto-minimal binding witnesses per stage and solves one
//! small LP per combination, maximizing over all of them.
//!
//! Policies whose near region is empty never constrain the game and their
//! coordinates stay at zero; they are dropped from the stage set. Infinite
//! divergences are capped at a large finite value to keep the LPs
//! well-posed; at that scale the affected coordinates are effectively
//! instant eliminations and the distortion is negligible.

use crate::error::{Error, Result};
use crate::scalar::Float;

use super::simplex::{maximize, Constraint, LpOutcome, Sense};
use super::{epsilon_min, EpsilonMin, RegionAnalysis};

/// Enumeration cap on the number of suboptimal policies with non-empty near
/// regions. Factorially many orderings above this are rejected; the explicit
/// certificate bound remains available.
pub const MAX_STAGES: usize = 7;

/// Cap on the total number of LP solves across orderings and witnesses.
const MAX_LP_SOLVES: usize = 400_000;

/// Finite stand-in for infinite divergence entries.
const INF_CAP: f64 = 1e12;

/// Solution of the scaling-constant optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretConstant {
    /// Optimal value: the L1 norm of the final growth vector.
    pub value: f64,
    /// The equivalent diagonal objective `Σ_l x_l(σ(l))`; equals `value`
    /// under the freezing constraints.
    pub diag_sum: f64,
    /// Optimal value with stage coordinates weighted by expected return
    /// times, when those were supplied (the time-instant reading of the
    /// play-count game).
    pub tau_weighted_value: Option<f64>,
    /// Elimination ordering: stage index -> realized policy index.
    pub ordering: Vec<usize>,
    /// Binding witness grid point per stage.
    pub witnesses: Vec<usize>,
    /// Growth vectors `x_l` in full policy coordinates (length = number of
    /// realized policies), one per stage.
    pub x: Vec<Vec<f64>>,
    /// The threshold constant `K`.
    pub target: f64,
    /// True when no suboptimal policy has near-region points: the game has
    /// no stages and the value is zero.
    pub vacuous: bool,
}

/// Computes the scaling constant of a region analysis.
///
/// `return_times`, when given (one entry per realized policy), additionally
/// reports the return-time-weighted objective.
pub fn regret_constant<F: Float>(
    analysis: &RegionAnalysis<F>,
    return_times: Option<&[F]>,
) -> Result<RegretConstant> {
    let n_policies = analysis.profile.n_policies();
    if let Some(tb) = return_times {
        if tb.len() != n_policies {
            return Err(Error::config("return-time vector must align with the policy set"));
        }
    }
    if !analysis.has_suboptimal_points() {
        return Err(Error::config(
            "no grid point has a suboptimal optimal policy; the scaling constant is undefined",
        ));
    }

    let stages: Vec<usize> = analysis
        .suboptimal_policies()
        .filter(|&c| !analysis.regions.s_prime[c].is_empty())
        .collect();
    let target = analysis.config.target_constant().as_f64();

    if stages.is_empty() {
        return Ok(RegretConstant {
            value: 0.0,
            diag_sum: 0.0,
            tau_weighted_value: return_times.map(|_| 0.0),
            ordering: Vec::new(),
            witnesses: Vec::new(),
            x: Vec::new(),
            target,
            vacuous: true,
        });
    }
    match epsilon_min(analysis) {
        EpsilonMin::Zero { point, policy } => {
            return Err(Error::InfiniteConstant(format!(
                "grid point {point} in the near region of policy {policy} has zero \
                 own-policy divergence; growth along that coordinate is unbounded"
            )));
        }
        EpsilonMin::Positive(_) | EpsilonMin::NoSuboptimalNearPoints => {}
    }
    if stages.len() > MAX_STAGES {
        return Err(Error::Capacity(format!(
            "{} suboptimal policies with near-region points exceed the ordering \
             enumeration cap of {MAX_STAGES}; use the certificate bound instead",
            stages.len()
        )));
    }

    // capped divergence rows restricted to stage coordinates
    let d_at = |point: usize, c: usize| -> f64 {
        let v = analysis.profile.value(point, c).as_f64();
        if v.is_infinite() {
            INF_CAP
        } else {
            v
        }
    };
    // Pareto-minimal witness candidates per stage policy (a point dominated
    // componentwise by another reaches the threshold later, so it can
    // neither bind first nor tighten the feasible set)
    let candidates: Vec<Vec<usize>> = stages
        .iter()
        .map(|&c| pareto_minimal(&analysis.regions.s_prime[c], &stages, &d_at))
        .collect();

    let n = stages.len();
    let n_combos: usize = candidates.iter().map(Vec::len).product();
    let n_orderings: usize = (1..=n).product();
    if n_orderings.saturating_mul(n_combos) > MAX_LP_SOLVES {
        return Err(Error::Capacity(format!(
            "ordering/witness enumeration needs {} LP solves, more than the cap {MAX_LP_SOLVES}",
            n_orderings * n_combos
        )));
    }

    let taus: Option<Vec<f64>> =
        return_times.map(|tb| tb.iter().map(|t| t.as_f64()).collect());

    let mut best: Option<(f64, Vec<usize>, Vec<usize>, Vec<f64>)> = None;
    let mut best_tau: Option<f64> = None;

    let mut order: Vec<usize> = (0..n).collect();
    permutations(&mut order, 0, &mut |perm| {
        // perm maps stage slot -> index into `stages`
        let mut combo = vec![0usize; n];
        loop {
            let witnesses: Vec<usize> =
                (0..n).map(|l| candidates[perm[l]][combo[l]]).collect();
            if let LpOutcome::Optimal { x, value } =
                solve_stage_lp(n, perm, &witnesses, &stages, &candidates, &d_at, target, None)
            {
                if best.as_ref().map_or(true, |(v, ..)| value > *v) {
                    best = Some((value, perm.to_vec(), witnesses.clone(), x));
                }
            }
            if let Some(taus) = &taus {
                if let LpOutcome::Optimal { value, .. } = solve_stage_lp(
                    n,
                    perm,
                    &witnesses,
                    &stages,
                    &candidates,
                    &d_at,
                    target,
                    Some(taus),
                ) {
                    if best_tau.map_or(true, |v| value > v) {
                        best_tau = Some(value);
                    }
                }
            }
            // odometer over witness combinations
            let mut pos = n;
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                combo[pos] += 1;
                if combo[pos] < candidates[perm[pos]].len() {
                    break;
                }
                combo[pos] = 0;
            }
        }
    });

    let (value, perm, witnesses, y) = best.ok_or_else(|| {
        Error::numerical(
            "no elimination ordering admits a feasible growth path; the stage \
             equalities are mutually inconsistent on this grid",
            f64::NAN,
        )
    })?;

    // reconstruct full-coordinate stage vectors from the triangular solution
    let ordering: Vec<usize> = perm.iter().map(|&slot| stages[slot]).collect();
    let var = |i: usize, m: usize| m * (m + 1) / 2 + i;
    let mut x = Vec::with_capacity(n);
    for l in 0..n {
        let mut row = vec![0.0; n_policies];
        for m in 0..n {
            row[ordering[m]] = y[var(l.min(m), m)];
        }
        x.push(row);
    }
    let diag_sum: f64 = (0..n).map(|l| x[l][ordering[l]]).sum();

    Ok(RegretConstant {
        value,
        diag_sum,
        tau_weighted_value: best_tau,
        ordering,
        witnesses,
        x,
        target,
        vacuous: false,
    })
}

/// Assembles and solves the LP for one (ordering, witness) choice.
///
/// Variables are the triangular entries `y_{i,m} = x_i(σ(m))` for `i <= m`
/// (the coordinate is frozen from stage `m` on). Stage `l`'s dot products
/// use frozen values for coordinates `m <= l` and the still-growing
/// `y_{l,m}` for `m > l`.
#[allow(clippy::too_many_arguments)]
fn solve_stage_lp(
    n: usize,
    perm: &[usize],
    witnesses: &[usize],
    stages: &[usize],
    candidates: &[Vec<usize>],
    d_at: &dyn Fn(usize, usize) -> f64,
    target: f64,
    tau_objective: Option<&[f64]>,
) -> LpOutcome {
    let n_vars = n * (n + 1) / 2;
    let var = |i: usize, m: usize| m * (m + 1) / 2 + i;

    let mut constraints = Vec::new();
    // monotone growth along every coordinate
    for m in 0..n {
        for i in 0..m {
            let mut coeffs = vec![0.0; n_vars];
            coeffs[var(i + 1, m)] = 1.0;
            coeffs[var(i, m)] = -1.0;
            constraints.push(Constraint { coeffs, sense: Sense::Ge, rhs: 0.0 });
        }
    }
    // stage conditions
    for l in 0..n {
        let stage_policy_coeff = |point: usize| -> Vec<f64> {
            let mut coeffs = vec![0.0; n_vars];
            for m in 0..n {
                let d = d_at(point, stages[perm[m]]);
                if d != 0.0 {
                    coeffs[var(l.min(m), m)] += d;
                }
            }
            coeffs
        };
        constraints.push(Constraint {
            coeffs: stage_policy_coeff(witnesses[l]),
            sense: Sense::Eq,
            rhs: target,
        });
        for &other in &candidates[perm[l]] {
            if other != witnesses[l] {
                constraints.push(Constraint {
                    coeffs: stage_policy_coeff(other),
                    sense: Sense::Ge,
                    rhs: target,
                });
            }
        }
    }

    let mut objective = vec![0.0; n_vars];
    for m in 0..n {
        objective[var(m, m)] = match tau_objective {
            None => 1.0,
            Some(taus) => taus[stages[perm[m]]],
        };
    }
    maximize(&objective, &constraints)
}

/// Keeps only points not componentwise dominated by another candidate.
fn pareto_minimal(
    points: &[usize],
    stages: &[usize],
    d_at: &dyn Fn(usize, usize) -> f64,
) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    'outer: for &p in points {
        let mut replaced = Vec::new();
        for (slot, &q) in keep.iter().enumerate() {
            let mut q_le_p = true;
            let mut p_le_q = true;
            for &c in stages {
                let (dp, dq) = (d_at(p, c), d_at(q, c));
                q_le_p &= dq <= dp;
                p_le_q &= dp <= dq;
            }
            if q_le_p {
                // q dominates p (or ties); p is redundant
                continue 'outer;
            }
            if p_le_q {
                replaced.push(slot);
            }
        }
        for &slot in replaced.iter().rev() {
            keep.remove(slot);
        }
        keep.push(p);
    }
    keep
}

fn permutations(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Re-verifies a solver output against the raw constraint system, without
/// going through the LP path: nonnegativity, the pinned optimal coordinate,
/// monotone dominance, freezing, and the stage minimum-equality conditions,
/// all to a 1e-9 scaled tolerance.
pub fn verify_witness<F: Float>(
    analysis: &RegionAnalysis<F>,
    solution: &RegretConstant,
) -> Result<()> {
    let tol = 1e-9 * solution.target.max(1.0);
    let n = solution.ordering.len();
    if solution.vacuous {
        if solution.value != 0.0 || n != 0 {
            return Err(Error::Validation("vacuous solution must be empty and zero".into()));
        }
        return Ok(());
    }
    let n_policies = analysis.profile.n_policies();
    let d_at = |point: usize, c: usize| -> f64 {
        let v = analysis.profile.value(point, c).as_f64();
        if v.is_infinite() {
            INF_CAP
        } else {
            v
        }
    };

    if solution.x.len() != n || solution.witnesses.len() != n {
        return Err(Error::Validation("witness shape mismatch".into()));
    }
    for l in 0..n {
        let x = &solution.x[l];
        if x.len() != n_policies {
            return Err(Error::Validation(format!("stage {l} vector has wrong length")));
        }
        if x.iter().any(|&v| v < -tol) {
            return Err(Error::Validation(format!("stage {l} vector has negative entries")));
        }
        if x[analysis.regions.c_star].abs() > tol {
            return Err(Error::Validation(format!(
                "stage {l} grows the optimal policy's coordinate"
            )));
        }
        // monotone dominance over earlier stages
        for j in 0..l {
            for c in 0..n_policies {
                if solution.x[j][c] > x[c] + tol {
                    return Err(Error::Validation(format!(
                        "monotonicity violated between stages {j} and {l} at coordinate {c}"
                    )));
                }
            }
        }
        // freezing of already-eliminated coordinates
        for j in 0..=l {
            let c = solution.ordering[j];
            if (x[c] - solution.x[j][c]).abs() > tol {
                return Err(Error::Validation(format!(
                    "frozen coordinate {c} moved between stages {j} and {l}"
                )));
            }
        }
        // stage minimum equality over the full near region
        let region = &analysis.regions.s_prime[solution.ordering[l]];
        if region.is_empty() {
            return Err(Error::Validation(format!(
                "stage {l} policy has an empty near region"
            )));
        }
        let mut min_dot = f64::INFINITY;
        for &point in region {
            let dot: f64 = (0..n_policies).map(|c| x[c] * d_at(point, c)).sum();
            min_dot = min_dot.min(dot);
        }
        if (min_dot - solution.target).abs() > tol {
            return Err(Error::Validation(format!(
                "stage {l} minimum {min_dot} misses the threshold {}",
                solution.target
            )));
        }
        let witness_dot: f64 =
            (0..n_policies).map(|c| x[c] * d_at(solution.witnesses[l], c)).sum();
        if (witness_dot - solution.target).abs() > tol {
            return Err(Error::Validation(format!("stage {l} witness is not binding")));
        }
    }
    // objective consistency, both readings
    let last = solution.x.last().expect("non-empty");
    let l1: f64 = last.iter().sum();
    if (l1 - solution.value).abs() > tol {
        return Err(Error::Validation(format!(
            "final L1 norm {l1} disagrees with reported value {}",
            solution.value
        )));
    }
    if (solution.diag_sum - solution.value).abs() > tol {
        return Err(Error::Validation(format!(
            "diagonal objective {} disagrees with L1 objective {}",
            solution.diag_sum, solution.value
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{AnalysisConfig, KlProfile};

    fn config_wide() -> AnalysisConfig<f64> {
        AnalysisConfig { epsilon_prime: f64::INFINITY, ..Default::default() }
    }

    fn analysis_of(
        n_policies: usize,
        c_star: usize,
        rows: &[(usize, Vec<f64>)],
        config: AnalysisConfig<f64>,
    ) -> RegionAnalysis<f64> {
        let n_points = rows.len();
        let mut d = Vec::with_capacity(n_points * n_policies);
        let mut region_of = Vec::with_capacity(n_points);
        for (region, row) in rows {
            assert_eq!(row.len(), n_policies);
            region_of.push(*region);
            d.extend_from_slice(row);
        }
        let profile = KlProfile::new(n_points, n_policies, d).unwrap();
        RegionAnalysis::from_raw(profile, region_of, c_star, config).unwrap()
    }

    #[test]
    fn one_stage_closed_form_is_exact() {
        // lone suboptimal point with D = (d, 0): value = K / d
        let d = 0.5;
        let analysis = analysis_of(2, 1, &[(0, vec![d, 0.0])], config_wide());
        let out = regret_constant(&analysis, None).unwrap();
        let k = analysis.config.target_constant();
        assert!((out.value - k / d).abs() < 1e-12, "{} vs {}", out.value, k / d);
        assert!((out.value - (1.1 / 0.9) / 0.5).abs() < 1e-9);
        verify_witness(&analysis, &out).unwrap();
        assert_eq!(out.ordering, vec![0]);
        assert_eq!(out.witnesses, vec![0]);
    }

    #[test]
    fn two_stage_instance_matches_hand_solution() {
        // regions 0 and 1 with one point each; c* = 2
        // D(p0) = (1, 0, 0), D(p1) = (0, 1, 0): decoupled, value = K + K
        let analysis = analysis_of(
            3,
            2,
            &[(0, vec![1.0, 0.0, 0.0]), (1, vec![0.0, 1.0, 0.0])],
            config_wide(),
        );
        let out = regret_constant(&analysis, None).unwrap();
        let k = analysis.config.target_constant();
        assert!((out.value - 2.0 * k).abs() < 1e-9, "{} vs {}", out.value, 2.0 * k);
        verify_witness(&analysis, &out).unwrap();
    }

    #[test]
    fn shared_information_reduces_the_constant() {
        // both points fully resolved by either coordinate: the first stage's
        // growth already eliminates the second region, so the total stays K
        let analysis = analysis_of(
            3,
            2,
            &[(0, vec![1.0, 1.0, 0.0]), (1, vec![1.0, 1.0, 0.0])],
            config_wide(),
        );
        let out = regret_constant(&analysis, None).unwrap();
        let k = analysis.config.target_constant();
        assert!((out.value - k).abs() < 1e-9, "{} vs {}", out.value, k);
        verify_witness(&analysis, &out).unwrap();
    }

    #[test]
    fn scaling_divergences_inversely_scales_value() {
        let rows = [(0usize, vec![0.7, 0.2, 0.0]), (1usize, vec![0.3, 0.9, 0.0])];
        let base = analysis_of(3, 2, &rows, config_wide());
        let base_value = regret_constant(&base, None).unwrap().value;
        let s = 4.0;
        let scaled_rows: Vec<(usize, Vec<f64>)> = rows
            .iter()
            .map(|(r, row)| (*r, row.iter().map(|v| v * s).collect()))
            .collect();
        let scaled = analysis_of(3, 2, &scaled_rows, config_wide());
        let scaled_value = regret_constant(&scaled, None).unwrap().value;
        assert!((scaled_value - base_value / s).abs() < 1e-9 * base_value);
    }

    #[test]
    fn zero_own_divergence_is_infinite() {
        let analysis = analysis_of(2, 1, &[(0, vec![0.0, 0.5])], config_wide());
        assert!(matches!(
            regret_constant(&analysis, None),
            Err(Error::InfiniteConstant(_))
        ));
    }

    #[test]
    fn no_suboptimal_points_is_rejected() {
        let analysis = analysis_of(2, 1, &[(1, vec![0.0, 0.0])], config_wide());
        assert!(matches!(regret_constant(&analysis, None), Err(Error::Config(_))));
    }

    #[test]
    fn empty_near_regions_are_vacuous() {
        // suboptimal points exist but all are separated (S' empty at eps'=0)
        let config = AnalysisConfig::default(); // epsilon_prime = 0
        let analysis = analysis_of(2, 1, &[(0, vec![0.5, 0.3])], config);
        let out = regret_constant(&analysis, None).unwrap();
        assert!(out.vacuous);
        assert_eq!(out.value, 0.0);
        verify_witness(&analysis, &out).unwrap();
    }

    #[test]
    fn tau_weighting_scales_the_objective() {
        let analysis = analysis_of(2, 1, &[(0, vec![0.5, 0.0])], config_wide());
        let out = regret_constant(&analysis, Some(&[3.0, 1.0])).unwrap();
        // single coordinate: weighted objective is 3x the unweighted one
        let tau = out.tau_weighted_value.unwrap();
        assert!((tau - 3.0 * out.value).abs() < 1e-9);
    }

    #[test]
    fn value_dominated_by_certificate_bound() {
        let rows = [
            (0usize, vec![0.7, 0.25, 0.0]),
            (0usize, vec![0.9, 0.4, 0.0]),
            (1usize, vec![0.3, 0.9, 0.0]),
        ];
        let analysis = analysis_of(3, 2, &rows, config_wide());
        let out = regret_constant(&analysis, None).unwrap();
        verify_witness(&analysis, &out).unwrap();
        let bound = crate::analysis::theorem4_bound(&analysis, 0.25, 1).unwrap();
        assert!(out.value <= bound.bound);
    }

    #[test]
    fn pareto_filter_keeps_only_minimal_points() {
        let d = vec![
            0.5, 0.2, //
            0.6, 0.3, // dominated by point 0
            0.4, 0.9, // incomparable
        ];
        let stages = vec![0usize, 1];
        let d_at = move |p: usize, c: usize| d[p * 2 + c];
        let kept = pareto_minimal(&[0, 1, 2], &stages, &d_at);
        assert_eq!(kept, vec![0, 2]);
    }
}
