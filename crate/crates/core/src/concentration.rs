//! Empirical harness for the iterated-logarithm concentration envelopes on
//! recurrence cycles.
//!
//! For each policy, cycles are independent excursions from the start state
//! back to itself; the cumulative cycle lengths and within-cycle transition
//! pair counts must stay inside an envelope of the form
//! `sqrt(k · d1 · log(|C| |S|^2 d2 · log k / delta))` around their expected
//! values, simultaneously for all cycle counts `k >= 2`, with probability at
//! least `1 − delta` over a whole path. The constants are existential in the
//! theory; here `d2` is pinned to `e` (so the inner logarithm is positive
//! from `k = 2` on) and `d1` is calibrated empirically on one batch of paths
//! and validated on another.
//!
//! This module is a verification harness; nothing here runs inside the
//! agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agents::tsmdp::sample_row;
use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, StationaryPolicy};
use crate::scalar::Float;

/// `d2` is fixed so `log(d2 log k)` is positive for every `k >= 2`.
pub const D2_FIXED: f64 = std::f64::consts::E;

/// Cycle records of one policy column: per-cycle lengths, transition pair
/// counts and reward sums.
#[derive(Debug, Clone)]
pub struct CycleSample {
    n_states: usize,
    pub cycle_lengths: Vec<u32>,
    /// `[cycle * S * S + s1 * S + s2]`
    counts: Vec<u32>,
    /// Reward accumulated within each cycle.
    pub cycle_rewards: Vec<f64>,
}

impl CycleSample {
    pub fn n_cycles(&self) -> usize {
        self.cycle_lengths.len()
    }

    #[inline]
    pub fn pair_count(&self, cycle: usize, s1: usize, s2: usize) -> u32 {
        self.counts[cycle * self.n_states * self.n_states + s1 * self.n_states + s2]
    }

    fn pair_slice(&self, cycle: usize) -> &[u32] {
        let sq = self.n_states * self.n_states;
        &self.counts[cycle * sq..(cycle + 1) * sq]
    }
}

/// Simulates `n_cycles` completed excursions `s0 -> s0` under one policy.
pub fn simulate_cycles<F: Float, R: Rng>(
    mdp: &FiniteMdp<F>,
    policy: &StationaryPolicy,
    s0: usize,
    n_cycles: usize,
    cycle_cap: u64,
    rng: &mut R,
) -> Result<CycleSample> {
    let chain = mdp.induce(policy)?;
    let n = mdp.n_states();
    if s0 >= n {
        return Err(Error::config(format!("start state {s0} out of range")));
    }
    let sq = n * n;
    let mut sample = CycleSample {
        n_states: n,
        cycle_lengths: Vec::with_capacity(n_cycles),
        counts: vec![0u32; n_cycles * sq],
        cycle_rewards: Vec::with_capacity(n_cycles),
    };
    let mut state = s0;
    for cycle in 0..n_cycles {
        let mut len: u64 = 0;
        let mut reward = 0.0f64;
        loop {
            let next = sample_row(chain.row(state), rng);
            reward += chain.step_reward(state).as_f64();
            sample.counts[cycle * sq + state * n + next] += 1;
            len += 1;
            state = next;
            if state == s0 {
                break;
            }
            if len >= cycle_cap {
                return Err(Error::Runtime(format!(
                    "cycle {cycle} exceeded the cap of {cycle_cap} steps without \
                     returning to state {s0}"
                )));
            }
        }
        sample.cycle_lengths.push(len as u32);
        sample.cycle_rewards.push(reward);
    }
    Ok(sample)
}

/// Deterministic per-column RNG: a shared seed with one ChaCha stream per
/// column index, so distinct policies get independent streams by
/// construction.
pub fn column_rng(seed: u64, column: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column);
    rng
}

/// Exact per-policy chain quantities the envelopes are centered on.
#[derive(Debug, Clone)]
pub struct ChainStats {
    /// Expected return time to the start state.
    pub tau_bar: f64,
    /// Stationary pair probabilities, `[s1 * S + s2]`.
    pub pair_stationary: Vec<f64>,
    /// Stationary state probabilities.
    pub marginal_stationary: Vec<f64>,
    /// Long-run average reward of the policy.
    pub gain: f64,
}

/// Computes [`ChainStats`] for one policy under the true model.
pub fn chain_stats<F: Float>(
    mdp: &FiniteMdp<F>,
    policy: &StationaryPolicy,
    s0: usize,
) -> Result<ChainStats> {
    let chain = mdp.induce(policy)?;
    let tau_bar = chain.expected_return_time(s0)?.as_f64();
    let pair = chain.pair_stationary()?;
    let pi = chain.stationary_distribution()?;
    let gain = chain.gain()?.as_f64();
    Ok(ChainStats {
        tau_bar,
        pair_stationary: pair.iter().map(|p| p.as_f64()).collect(),
        marginal_stationary: pi.iter().map(|p| p.as_f64()).collect(),
        gain,
    })
}

/// Envelope constants: deviations at cycle count `k` are bounded by
/// `sqrt(k · d1 · log(union_factor · d2 · log k / delta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSpec {
    pub d1: f64,
    pub d2: f64,
    pub delta: f64,
}

impl BoundSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d1 < 0.0 || self.d2 <= 0.0 {
            return Err(Error::config("bound constants must be nonnegative (d2 positive)"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config("delta must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Squared envelope at cycle count `k >= 2`; `union_factor` is
    /// `|C| · |S|^2` from the union bound over policies and state pairs.
    pub fn envelope_sq(&self, k: usize, union_factor: f64) -> f64 {
        self.d1 * envelope_denominator(k, self.d2, self.delta, union_factor)
    }
}

/// The factor `k · log(union_factor · d2 · log k / delta)` multiplying `d1`
/// in the squared envelope.
fn envelope_denominator(k: usize, d2: f64, delta: f64, union_factor: f64) -> f64 {
    debug_assert!(k >= 2);
    let k_f = k as f64;
    k_f * (union_factor * d2 * k_f.ln() / delta).ln()
}

/// Outcome of checking one path (all policy columns) against an envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCheck {
    /// Largest squared deviation divided by the squared envelope.
    pub worst_ratio_sq: f64,
    /// Cycle count at which the worst ratio occurred.
    pub worst_k: usize,
    pub violated: bool,
}

/// The three envelope families of the uniform concentration estimate, plus
/// the optional cycle-reward family reusing the same constants.
fn path_deviation_statistic(
    samples: &[CycleSample],
    stats: &[ChainStats],
    include_rewards: bool,
    mut per_k: impl FnMut(usize, f64),
) {
    for (sample, st) in samples.iter().zip(stats) {
        let n = sample.n_states;
        let sq = n * n;
        let mut tau: f64 = 0.0;
        let mut cum_pairs = vec![0u64; sq];
        let mut reward_dev = 0.0f64;
        for cycle in 0..sample.n_cycles() {
            let len = sample.cycle_lengths[cycle] as f64;
            tau += len;
            for (acc, &c) in cum_pairs.iter_mut().zip(sample.pair_slice(cycle)) {
                *acc += c as u64;
            }
            if include_rewards {
                reward_dev += st.gain * len - sample.cycle_rewards[cycle];
            }
            let k = cycle + 1;
            if k < 2 {
                continue;
            }
            let k_f = k as f64;
            let mut worst = (tau - k_f * st.tau_bar).abs();
            for s1 in 0..n {
                let mut from_s1 = 0.0f64;
                let mut from_s1_mean = 0.0f64;
                for s2 in 0..n {
                    let dev = cum_pairs[s1 * n + s2] as f64
                        - k_f * st.tau_bar * st.pair_stationary[s1 * n + s2];
                    worst = worst.max(dev.abs());
                    from_s1 += cum_pairs[s1 * n + s2] as f64;
                    from_s1_mean += k_f * st.tau_bar * st.pair_stationary[s1 * n + s2];
                }
                // marginal family, using pi(s1) = sum_s2 pair(s1, s2)
                let _ = from_s1_mean;
                let marginal_dev =
                    from_s1 - k_f * st.tau_bar * st.marginal_stationary[s1];
                worst = worst.max(marginal_dev.abs());
            }
            if include_rewards {
                // one-sided family: only positive drift counts
                worst = worst.max(reward_dev.max(0.0));
            }
            per_k(k, worst * worst);
        }
    }
}

/// Checks one path against a fitted envelope.
pub fn check_uniform_bound(
    samples: &[CycleSample],
    stats: &[ChainStats],
    spec: &BoundSpec,
    union_factor: f64,
    include_rewards: bool,
) -> Result<PathCheck> {
    spec.validate()?;
    if samples.len() != stats.len() || samples.is_empty() {
        return Err(Error::config("need one stats entry per policy column"));
    }
    let mut worst_ratio_sq = 0.0f64;
    let mut worst_k = 2usize;
    path_deviation_statistic(samples, stats, include_rewards, |k, dev_sq| {
        let env = spec.envelope_sq(k, union_factor);
        let ratio = if env > 0.0 {
            dev_sq / env
        } else if dev_sq > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > worst_ratio_sq {
            worst_ratio_sq = ratio;
            worst_k = k;
        }
    });
    Ok(PathCheck { worst_ratio_sq, worst_k, violated: worst_ratio_sq > 1.0 })
}

/// Smallest `d1` making every envelope hold on this path (with `d2` fixed).
pub fn required_d1(
    samples: &[CycleSample],
    stats: &[ChainStats],
    delta: f64,
    union_factor: f64,
    include_rewards: bool,
) -> f64 {
    let mut required = 0.0f64;
    path_deviation_statistic(samples, stats, include_rewards, |k, dev_sq| {
        let denom = envelope_denominator(k, D2_FIXED, delta, union_factor);
        if denom > 0.0 {
            required = required.max(dev_sq / denom);
        }
    });
    required
}

/// Calibration output: the fitted envelope plus per-pair diagnostics (the
/// `d1` each transition pair alone would need, pooled across policies).
#[derive(Debug, Clone)]
pub struct FitReport {
    pub spec: BoundSpec,
    pub per_pair_d1: Vec<f64>,
    pub calibration_paths: usize,
    pub cycles_per_path: usize,
}

/// Harness configuration shared by calibration and validation.
#[derive(Debug, Clone)]
pub struct HarnessConfig<'a, F> {
    pub mdp: &'a FiniteMdp<F>,
    pub policies: &'a [StationaryPolicy],
    pub s0: usize,
    pub cycles_per_path: usize,
    pub cycle_cap: u64,
    pub include_rewards: bool,
}

impl<'a, F: Float> HarnessConfig<'a, F> {
    fn union_factor(&self) -> f64 {
        let s = self.mdp.n_states() as f64;
        self.policies.len() as f64 * s * s
    }

    fn stats(&self) -> Result<Vec<ChainStats>> {
        self.policies.iter().map(|p| chain_stats(self.mdp, p, self.s0)).collect()
    }

    fn simulate_path(&self, seed: u64, path: u64) -> Result<Vec<CycleSample>> {
        self.policies
            .iter()
            .enumerate()
            .map(|(c, policy)| {
                let mut rng = column_rng(seed, path * self.policies.len() as u64 + c as u64);
                simulate_cycles(self.mdp, policy, self.s0, self.cycles_per_path, self.cycle_cap, &mut rng)
            })
            .collect()
    }
}

/// Fits the smallest `d1` (with `d2 = e`) such that at most a `delta`
/// fraction of the calibration paths violates any envelope.
pub fn fit_constants<F: Float>(
    config: &HarnessConfig<'_, F>,
    delta: f64,
    n_paths: usize,
    seed: u64,
) -> Result<FitReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::config("delta must lie in (0, 1]"));
    }
    let minimum = (100.0 / delta).ceil() as usize;
    if n_paths < minimum {
        return Err(Error::config(format!(
            "calibration needs at least {minimum} paths at delta {delta}, got {n_paths}"
        )));
    }
    let stats = config.stats()?;
    let union_factor = config.union_factor();
    let n = config.mdp.n_states();
    let sq = n * n;

    let per_path: Result<Vec<(f64, Vec<f64>)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let samples = config.simulate_path(seed, path)?;
            let pooled =
                required_d1(&samples, &stats, delta, union_factor, config.include_rewards);
            // per-pair diagnostic: the d1 each (s1, s2) family alone needs
            let mut pair_req = vec![0.0f64; sq];
            for (sample, st) in samples.iter().zip(&stats) {
                let mut cum = vec![0u64; sq];
                for cycle in 0..sample.n_cycles() {
                    for (acc, &c) in cum.iter_mut().zip(sample.pair_slice(cycle)) {
                        *acc += c as u64;
                    }
                    let k = cycle + 1;
                    if k < 2 {
                        continue;
                    }
                    let denom = envelope_denominator(k, D2_FIXED, delta, union_factor);
                    for pair in 0..sq {
                        let dev = cum[pair] as f64
                            - k as f64 * st.tau_bar * st.pair_stationary[pair];
                        pair_req[pair] = pair_req[pair].max(dev * dev / denom);
                    }
                }
            }
            Ok((pooled, pair_req))
        })
        .collect();
    let per_path = per_path?;

    let quantile_index = ((1.0 - delta) * n_paths as f64).ceil() as usize;
    let quantile_index = quantile_index.min(n_paths - 1);
    let mut pooled: Vec<f64> = per_path.iter().map(|(p, _)| *p).collect();
    pooled.sort_by(f64::total_cmp);
    let d1 = pooled[quantile_index];

    let mut per_pair_d1 = vec![0.0f64; sq];
    for pair in 0..sq {
        let mut vals: Vec<f64> = per_path.iter().map(|(_, v)| v[pair]).collect();
        vals.sort_by(f64::total_cmp);
        per_pair_d1[pair] = vals[quantile_index];
    }

    Ok(FitReport {
        spec: BoundSpec { d1, d2: D2_FIXED, delta },
        per_pair_d1,
        calibration_paths: n_paths,
        cycles_per_path: config.cycles_per_path,
    })
}

/// Fraction of fresh paths on which any envelope is violated.
pub fn holdout_violation_fraction<F: Float>(
    config: &HarnessConfig<'_, F>,
    spec: &BoundSpec,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    let stats = config.stats()?;
    let union_factor = config.union_factor();
    let violations: Result<Vec<bool>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let samples = config.simulate_path(seed, path)?;
            let check = check_uniform_bound(
                &samples,
                &stats,
                spec,
                union_factor,
                config.include_rewards,
            )?;
            Ok(check.violated)
        })
        .collect();
    let violations = violations?;
    Ok(violations.iter().filter(|&&v| v).count() as f64 / n_paths as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_two_state_mdp, TwoStateParams};
    use crate::linalg::affine_fit;
    use crate::mdp::FiniteMdp;

    fn two_state_fixture() -> FiniteMdp<f64> {
        build_two_state_mdp(
            &TwoStateParams { p12_a1: 0.35, p21_a1: 0.45, p12_a2: 0.6, p21_a2: 0.25 },
            (0.0, 1.0),
        )
        .unwrap()
    }

    fn all_policies() -> Vec<StationaryPolicy> {
        StationaryPolicy::enumerate_all(2, 2)
    }

    #[test]
    fn deterministic_cycle_lengths_are_exact() {
        // period-2 swap chain: every cycle has length exactly 2
        let mdp = FiniteMdp::<f64>::new(
            2,
            1,
            vec![1.0, 2.0],
            vec![0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        let policy = StationaryPolicy::constant(2, 0);
        let mut rng = column_rng(3, 0);
        let sample = simulate_cycles(&mdp, &policy, 0, 500, 1000, &mut rng).unwrap();
        assert!(sample.cycle_lengths.iter().all(|&l| l == 2));
        assert!(sample.cycle_rewards.iter().all(|&r| r == 3.0));
        assert_eq!(sample.pair_count(0, 0, 1), 1);
        assert_eq!(sample.pair_count(0, 1, 0), 1);
    }

    #[test]
    fn zero_variance_chain_never_violates_any_positive_envelope() {
        let mdp =
            FiniteMdp::<f64>::new(2, 1, vec![0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let policy = StationaryPolicy::constant(2, 0);
        let mut rng = column_rng(3, 0);
        let samples =
            vec![simulate_cycles(&mdp, &policy, 0, 300, 1000, &mut rng).unwrap()];
        let stats = vec![chain_stats(&mdp, &policy, 0).unwrap()];
        let spec = BoundSpec { d1: 1e-6, d2: D2_FIXED, delta: 0.05 };
        let check = check_uniform_bound(&samples, &stats, &spec, 4.0, true).unwrap();
        assert!(!check.violated, "worst ratio {}", check.worst_ratio_sq);
        assert_eq!(required_d1(&samples, &stats, 0.05, 4.0, true), 0.0);
    }

    #[test]
    fn mean_cycle_length_matches_kac_within_monte_carlo_error() {
        let mdp = two_state_fixture();
        let policy = StationaryPolicy::new(vec![0, 1]);
        let stats = chain_stats(&mdp, &policy, 0).unwrap();
        let mut rng = column_rng(11, 0);
        let n = 100_000;
        let sample = simulate_cycles(&mdp, &policy, 0, n, 10_000, &mut rng).unwrap();
        let mean =
            sample.cycle_lengths.iter().map(|&l| l as f64).sum::<f64>() / n as f64;
        let var = sample
            .cycle_lengths
            .iter()
            .map(|&l| (l as f64 - mean).powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let stderr = (var / n as f64).sqrt();
        assert!(
            (mean - stats.tau_bar).abs() < 3.0 * stderr,
            "mean {mean}, tau_bar {}, stderr {stderr}",
            stats.tau_bar
        );
    }

    #[test]
    fn per_cycle_pair_count_mean_matches_renewal_reward() {
        let mdp = two_state_fixture();
        let policy = StationaryPolicy::new(vec![1, 0]);
        let stats = chain_stats(&mdp, &policy, 0).unwrap();
        let mut rng = column_rng(12, 0);
        let n = 100_000;
        let sample = simulate_cycles(&mdp, &policy, 0, n, 10_000, &mut rng).unwrap();
        for s1 in 0..2 {
            for s2 in 0..2 {
                let total: f64 =
                    (0..n).map(|c| sample.pair_count(c, s1, s2) as f64).sum();
                let mean = total / n as f64;
                let expected = stats.tau_bar * stats.pair_stationary[s1 * 2 + s2];
                // crude normal error bar on a bounded-by-length count
                let stderr = (stats.tau_bar * 4.0 / n as f64).sqrt();
                assert!(
                    (mean - expected).abs() < 3.0 * stderr.max(1e-3),
                    "pair ({s1},{s2}): mean {mean} vs expected {expected}"
                );
            }
        }
    }

    #[test]
    fn pair_counts_never_exceed_cycle_length() {
        let mdp = two_state_fixture();
        let policy = StationaryPolicy::new(vec![0, 0]);
        let mut rng = column_rng(13, 0);
        let sample = simulate_cycles(&mdp, &policy, 0, 2000, 10_000, &mut rng).unwrap();
        for cycle in 0..sample.n_cycles() {
            let len = sample.cycle_lengths[cycle];
            let total: u32 = sample.pair_slice(cycle).iter().sum();
            assert_eq!(total, len);
            assert!(sample.pair_slice(cycle).iter().all(|&c| c <= len));
        }
    }

    #[test]
    fn column_streams_are_separated_and_reproducible() {
        let a: Vec<u64> = {
            let mut rng = column_rng(7, 0);
            (0..8).map(|_| rng.random()).collect()
        };
        let a_again: Vec<u64> = {
            let mut rng = column_rng(7, 0);
            (0..8).map(|_| rng.random()).collect()
        };
        let b: Vec<u64> = {
            let mut rng = column_rng(7, 1);
            (0..8).map(|_| rng.random()).collect()
        };
        assert_eq!(a, a_again);
        assert_ne!(a, b);
    }

    #[test]
    fn fitted_d1_is_nonincreasing_in_delta() {
        let mdp = two_state_fixture();
        let policies = all_policies();
        let config = HarnessConfig {
            mdp: &mdp,
            policies: &policies,
            s0: 0,
            cycles_per_path: 400,
            cycle_cap: 100_000,
            include_rewards: false,
        };
        let mut previous = f64::INFINITY;
        for &delta in &[0.01f64, 0.05, 0.2] {
            let n_paths = ((100.0 / delta).ceil() as usize).max(500);
            let report = fit_constants(&config, delta, n_paths, 21).unwrap();
            assert!(
                report.spec.d1 <= previous + 1e-12,
                "d1 increased from {previous} at delta {delta}: {}",
                report.spec.d1
            );
            previous = report.spec.d1;
        }
    }

    #[test]
    fn insufficient_calibration_paths_rejected() {
        let mdp = two_state_fixture();
        let policies = all_policies();
        let config = HarnessConfig {
            mdp: &mdp,
            policies: &policies,
            s0: 0,
            cycles_per_path: 100,
            cycle_cap: 100_000,
            include_rewards: false,
        };
        assert!(matches!(
            fit_constants(&config, 0.05, 100, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fitted_spec_passes_holdout_at_twice_delta() {
        let mdp = two_state_fixture();
        let policies = all_policies();
        let config = HarnessConfig {
            mdp: &mdp,
            policies: &policies,
            s0: 0,
            cycles_per_path: 500,
            cycle_cap: 100_000,
            include_rewards: false,
        };
        let delta = 0.05;
        let report = fit_constants(&config, delta, 2000, 31).unwrap();
        let fraction =
            holdout_violation_fraction(&config, &report.spec, 2000, 77).unwrap();
        assert!(fraction <= 2.0 * delta, "holdout violation fraction {fraction}");
        assert!(fraction >= 0.0);
    }

    #[test]
    fn deviations_grow_like_sqrt_k_log_log() {
        // max deviation / sqrt(k) should grow slower than k^0.1
        let mdp = two_state_fixture();
        let policy = StationaryPolicy::new(vec![0, 1]);
        let stats = vec![chain_stats(&mdp, &policy, 0).unwrap()];
        let ks = [100usize, 1000, 10_000, 100_000];
        let mut normalized = vec![0.0f64; ks.len()];
        for path in 0..20u64 {
            let mut rng = column_rng(41, path);
            let samples = vec![
                simulate_cycles(&mdp, &policy, 0, 100_000, 100_000, &mut rng).unwrap(),
            ];
            let mut max_at = vec![0.0f64; ks.len()];
            path_deviation_statistic(&samples, &stats, false, |k, dev_sq| {
                for (slot, &kk) in ks.iter().enumerate() {
                    if k <= kk {
                        max_at[slot] = max_at[slot].max(dev_sq / k as f64);
                    }
                }
            });
            for (slot, m) in max_at.iter().enumerate() {
                normalized[slot] = normalized[slot].max(*m);
            }
        }
        let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
        let ys: Vec<f64> = normalized.iter().map(|&m| m.sqrt().max(1e-12).ln()).collect();
        let (_, slope, _) = affine_fit(&xs, &ys);
        assert!(slope <= 0.1, "normalized deviation growth exponent {slope}");
    }

    #[test]
    fn cycle_length_survival_decays_at_the_guaranteed_rate() {
        let mdp = two_state_fixture();
        let policy = StationaryPolicy::new(vec![0, 1]);
        let chain = mdp.induce(&policy).unwrap();
        let hitting = chain.expected_hitting_times(0).unwrap();
        let tau_bar = chain.expected_return_time(0).unwrap();
        let tau_max = hitting.iter().cloned().fold(tau_bar, f64::max);

        let mut rng = column_rng(55, 0);
        let n = 200_000;
        let sample = simulate_cycles(&mdp, &policy, 0, n, 100_000, &mut rng).unwrap();
        let max_len = *sample.cycle_lengths.iter().max().unwrap() as usize;
        let mut survival = vec![0u64; max_len + 1];
        for &l in &sample.cycle_lengths {
            survival[l as usize - 1] += 1; // count lengths > v for v < l
        }
        // suffix-sum into P(len > v)
        for v in (0..max_len).rev() {
            survival[v] += survival[v + 1];
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for v in 1..=max_len {
            if survival[v] >= 50 {
                xs.push(v as f64);
                ys.push((survival[v] as f64 / n as f64).log2());
            }
        }
        assert!(xs.len() >= 3, "not enough tail support");
        let (_, slope, _) = affine_fit(&xs, &ys);
        let guaranteed = -1.0 / (2.0 * tau_max);
        assert!(
            slope <= guaranteed + 0.05,
            "log2-survival slope {slope} vs guaranteed {guaranteed}"
        );
    }
}
