//! Posterior distribution over a finite parameter grid.
//!
//! All arithmetic happens in log space: each grid point carries the log of
//! its unnormalized weight (log prior plus accumulated log likelihoods), and
//! queries normalize once through a log-sum-exp. Grid points that assign
//! probability zero to an observed transition drop to `-inf` and stay there.

use rand::Rng;

use crate::error::{Error, Result};
use crate::families::ParamGrid;
use crate::scalar::Float;

/// Log-space posterior state over the points of a [`ParamGrid`].
#[derive(Debug, Clone)]
pub struct PosteriorState<F> {
    log_weights: Vec<F>,
    /// Precomputed `log p_theta(s1, a, s2)` per grid point, laid out as
    /// `[point][ (s1 * n_actions + a) * n_states + s2 ]`.
    log_kernels: Vec<Vec<F>>,
    n_states: usize,
    n_actions: usize,
    eliminated: usize,
}

impl<F: Float> PosteriorState<F> {
    /// Initializes from prior weights; `None` means the uniform prior.
    pub fn init(grid: &ParamGrid<F>, prior_weights: Option<&[F]>) -> Result<Self> {
        let n = grid.len();
        let log_weights: Vec<F> = match prior_weights {
            None => vec![F::zero(); n],
            Some(w) => {
                if w.len() != n {
                    return Err(Error::config(format!(
                        "prior has {} weights for a grid of {n} points",
                        w.len()
                    )));
                }
                if w.iter().any(|x| *x < F::zero() || !x.is_finite()) {
                    return Err(Error::config("prior weights must be finite and nonnegative"));
                }
                if w.iter().all(|x| *x == F::zero()) {
                    return Err(Error::config("prior weights must not all be zero"));
                }
                w.iter().map(|x| x.ln()).collect()
            }
        };
        let n_states = grid.mdp(0).n_states();
        let n_actions = grid.mdp(0).n_actions();
        let log_kernels = grid
            .mdps()
            .iter()
            .map(|mdp| {
                let mut table = Vec::with_capacity(n_states * n_actions * n_states);
                for s1 in 0..n_states {
                    for a in 0..n_actions {
                        table.extend(mdp.kernel_row(s1, a).iter().map(|p| p.ln()));
                    }
                }
                table
            })
            .collect();
        Ok(Self { log_weights, log_kernels, n_states, n_actions, eliminated: 0 })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Unnormalized log weights (log prior plus accumulated log likelihood).
    pub fn log_weights(&self) -> &[F] {
        &self.log_weights
    }

    /// Number of grid points eliminated so far by a zero-likelihood
    /// observation.
    pub fn eliminated_points(&self) -> usize {
        self.eliminated
    }

    /// Log likelihood `log p_theta(s1, a, s2)` for one grid point.
    #[inline]
    pub fn log_likelihood(&self, point: usize, s1: usize, a: usize, s2: usize) -> F {
        self.log_kernels[point][(s1 * self.n_actions + a) * self.n_states + s2]
    }

    /// Bayes update on one observed transition: adds the per-point log
    /// likelihood of `(s1, a, s2)` to every live weight.
    pub fn log_update(&mut self, s1: usize, a: usize, s2: usize) -> Result<()> {
        if s1 >= self.n_states || s2 >= self.n_states || a >= self.n_actions {
            return Err(Error::config(format!("transition ({s1},{a},{s2}) out of range")));
        }
        let offset = (s1 * self.n_actions + a) * self.n_states + s2;
        let mut any_live = false;
        for (w, table) in self.log_weights.iter_mut().zip(&self.log_kernels) {
            if w.is_finite() {
                let ll = table[offset];
                if !ll.is_finite() {
                    self.eliminated += 1;
                }
                *w += ll;
                any_live = any_live || w.is_finite();
            }
        }
        if !any_live {
            return Err(Error::config(format!(
                "observed transition ({s1},{a},{s2}) has probability zero under every grid point"
            )));
        }
        Ok(())
    }

    fn log_normalizer(&self) -> F {
        log_sum_exp(&self.log_weights)
    }

    /// Normalized probabilities (sums to one up to round-off).
    pub fn probabilities(&self) -> Vec<F> {
        let z = self.log_normalizer();
        self.log_weights.iter().map(|w| (*w - z).exp()).collect()
    }

    /// Normalized probability of a set of grid indices.
    pub fn mass_of_set(&self, indices: &[usize]) -> Result<F> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::config(format!("grid index {bad} out of range")));
        }
        let z = self.log_normalizer();
        Ok(indices.iter().map(|&i| (self.log_weights[i] - z).exp()).sum())
    }

    /// Draws a grid index with probability proportional to its weight, by
    /// inverse-CDF lookup after a log-sum-exp normalization.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let probs = self.probabilities();
        let u = F::of(rng.random::<f64>());
        let mut acc = F::zero();
        for (i, p) in probs.iter().enumerate() {
            acc += *p;
            if u < acc {
                return i;
            }
        }
        // round-off tail: fall back to the last live point
        probs
            .iter()
            .rposition(|p| *p > F::zero())
            .expect("posterior has at least one live point")
    }
}

/// Numerically stable `log Σ exp(x_i)`; `-inf` entries contribute nothing.
pub fn log_sum_exp<F: Float>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if !max.is_finite() {
        return max;
    }
    let sum: F = xs.iter().map(|x| (*x - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{grid_prior, FamilyKind, TwoStateParams};
    use crate::families::{QueueConfig, ParamGrid};
    use crate::mdp::FiniteMdp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> QueueConfig<f64> {
        QueueConfig {
            capacity: 4,
            mu_slow: 0.3,
            mu_fast: 0.8,
            cost_slow: 0.0,
            cost_fast: 2.0,
            holding_cost: 0.5,
            service_reward: 10.0,
            lambda_cap: 0.9,
        }
    }

    fn bernoulli_grid(ps: &[f64]) -> ParamGrid<f64> {
        // one-state, one-action MDPs are useless; use 2-state chains where
        // p(0,0,1) = p and p(1,0,0) = 0.5 so likelihoods differ across points
        let mdps: Vec<FiniteMdp<f64>> = ps
            .iter()
            .map(|&p| {
                FiniteMdp::new(2, 1, vec![0.0, 0.0], vec![1.0 - p, p, 0.5, 0.5]).unwrap()
            })
            .collect();
        let labels = ps.iter().map(|p| format!("{p}")).collect();
        let coords = ps.iter().map(|&p| vec![p]).collect();
        ParamGrid::new(mdps, labels, coords).unwrap()
    }

    #[test]
    fn uniform_init_gives_equal_probabilities() {
        let config = small_config();
        let axis: Vec<f64> = (1..=19).map(|i| 0.05 * i as f64).collect();
        let sigma: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
        let grid = grid_prior(FamilyKind::Queue, &[axis, sigma], &config, (0.0, 1.0)).unwrap();
        let posterior = PosteriorState::init(&grid, None).unwrap();
        let probs = posterior.probabilities();
        assert_eq!(probs.len(), 190);
        for p in probs {
            assert!((p - 1.0 / 190.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_init_normalizes() {
        let grid = bernoulli_grid(&[0.2, 0.5, 0.8]);
        let posterior = PosteriorState::init(&grid, Some(&[2.0, 1.0, 1.0])).unwrap();
        let probs = posterior.probabilities();
        assert!((probs[0] - 0.5).abs() < 1e-15);
        assert!((probs[1] - 0.25).abs() < 1e-15);
        assert!((probs[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn init_rejects_bad_weights() {
        let grid = bernoulli_grid(&[0.2, 0.8]);
        assert!(PosteriorState::init(&grid, Some(&[1.0, -0.5])).is_err());
        assert!(PosteriorState::init(&grid, Some(&[0.0, 0.0])).is_err());
        assert!(PosteriorState::init(&grid, Some(&[1.0])).is_err());
    }

    #[test]
    fn zero_prior_point_stays_at_zero() {
        let grid = bernoulli_grid(&[0.2, 0.5, 0.8]);
        let mut posterior = PosteriorState::init(&grid, Some(&[1.0, 0.0, 1.0])).unwrap();
        for _ in 0..50 {
            posterior.log_update(0, 0, 1).unwrap();
            posterior.log_update(1, 0, 0).unwrap();
        }
        assert_eq!(posterior.probabilities()[1], 0.0);
    }

    #[test]
    fn bayes_arithmetic_matches_hand_computation() {
        // prior (0.5, 0.5), likelihoods (0.8, 0.4) -> posterior (2/3, 1/3)
        let grid = bernoulli_grid(&[0.8, 0.4]);
        let mut posterior = PosteriorState::init(&grid, None).unwrap();
        posterior.log_update(0, 0, 1).unwrap();
        let probs = posterior.probabilities();
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((probs[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_likelihoods_leave_ratio_unchanged() {
        let grid = bernoulli_grid(&[0.6, 0.6]);
        let mut posterior = PosteriorState::init(&grid, Some(&[3.0, 1.0])).unwrap();
        for _ in 0..20 {
            posterior.log_update(0, 0, 1).unwrap();
        }
        let probs = posterior.probabilities();
        assert!((probs[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn update_order_does_not_matter() {
        let grid = bernoulli_grid(&[0.3, 0.7]);
        let seq = [(0usize, 0usize, 1usize), (1, 0, 0), (0, 0, 0), (0, 0, 1)];
        let mut forward = PosteriorState::init(&grid, None).unwrap();
        for &(s1, a, s2) in &seq {
            forward.log_update(s1, a, s2).unwrap();
        }
        let mut backward = PosteriorState::init(&grid, None).unwrap();
        for &(s1, a, s2) in seq.iter().rev() {
            backward.log_update(s1, a, s2).unwrap();
        }
        let (pf, pb) = (forward.probabilities(), backward.probabilities());
        for (a, b) in pf.iter().zip(&pb) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impossible_observation_under_all_points_is_hard_error() {
        let grid = bernoulli_grid(&[0.0, 0.0]);
        let mut posterior = PosteriorState::init(&grid, None).unwrap();
        assert!(posterior.log_update(0, 0, 1).is_err());
        // a single impossible point is fine and gets eliminated
        let grid = bernoulli_grid(&[0.0, 0.5]);
        let mut posterior = PosteriorState::init(&grid, None).unwrap();
        posterior.log_update(0, 0, 1).unwrap();
        assert_eq!(posterior.eliminated_points(), 1);
        assert_eq!(posterior.probabilities()[0], 0.0);
    }

    #[test]
    fn normalization_survives_long_update_sequences() {
        let grid = bernoulli_grid(&[0.3, 0.5, 0.7]);
        let mut posterior = PosteriorState::init(&grid, None).unwrap();
        for i in 0..200_000 {
            posterior.log_update(0, 0, (i % 2 == 0) as usize).unwrap();
        }
        let total: f64 = posterior.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_of_set_identities() {
        let grid = bernoulli_grid(&[0.2, 0.5, 0.8]);
        let mut posterior = PosteriorState::init(&grid, None).unwrap();
        posterior.log_update(0, 0, 1).unwrap();
        assert!((posterior.mass_of_set(&[0, 1, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(posterior.mass_of_set(&[]).unwrap(), 0.0);
        let a = posterior.mass_of_set(&[0]).unwrap();
        let ac = posterior.mass_of_set(&[1, 2]).unwrap();
        assert!((a + ac - 1.0).abs() < 1e-12);
        assert!(posterior.mass_of_set(&[3]).is_err());
    }

    #[test]
    fn degenerate_posterior_always_samples_its_point() {
        let grid = bernoulli_grid(&[0.2, 0.5, 0.8]);
        let posterior = PosteriorState::init(&grid, Some(&[0.0, 1.0, 0.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(posterior.sample(&mut rng), 1);
        }
    }

    #[test]
    fn sampling_frequencies_match_uniform_probabilities() {
        let grid = bernoulli_grid(&[0.2, 0.4, 0.6, 0.8]);
        let posterior = PosteriorState::init(&grid, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[posterior.sample(&mut rng)] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn fixed_seed_reproduces_draw_sequence() {
        let grid = bernoulli_grid(&[0.2, 0.4, 0.6, 0.8]);
        let posterior = PosteriorState::init(&grid, None).unwrap();
        let draw = |seed: u64| -> Vec<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| posterior.sample(&mut rng)).collect()
        };
        assert_eq!(draw(123), draw(123));
        assert_ne!(draw(123), draw(124));
    }

    #[test]
    fn two_state_grid_posterior_concentrates_on_truth() {
        let axis = vec![0.2, 0.5, 0.8];
        let config = small_config();
        let axes = [axis.clone(), vec![0.3], vec![0.5], vec![0.5]];
        let grid = grid_prior(FamilyKind::TwoState, &axes, &config, (0.0, 1.0)).unwrap();
        let truth = TwoStateParams { p12_a1: 0.5, p21_a1: 0.3, p12_a2: 0.5, p21_a2: 0.5 };
        let true_mdp = crate::families::build_two_state_mdp(&truth, (0.0, 1.0)).unwrap();
        let mut posterior = PosteriorState::init(&grid, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = 0usize;
        for _ in 0..3000 {
            let row = true_mdp.kernel_row(s, 0);
            let u: f64 = rng.random();
            let s2 = if u < row[0] { 0 } else { 1 };
            posterior.log_update(s, 0, s2).unwrap();
            s = s2;
        }
        let probs = posterior.probabilities();
        assert!(probs[1] > 0.99, "posterior {probs:?}");
    }
}
