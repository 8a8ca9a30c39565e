//! Parameterized MDP families: a single-buffer queue with a Gaussian-shaped
//! state-dependent arrival curve, a two-server queue with a scalar Bernoulli
//! arrival rate, and a 2-state/2-action chain with canonical transition
//! parameters. Each family maps a parameter point to a [`FiniteMdp`]; grids
//! of such points feed the sampler's prior.
//!
//! Slot dynamics convention (shared by both queue families): in one slot from
//! state `s` under action `i`, a service success occurs with probability
//! `mu_i · 1{s > 0}` and an arrival occurs independently with probability
//! `lambda(s)`; the next state is `s − serve + arrive` clipped to `[0, M]`,
//! so an arrival into a full queue is lost. The reward is the expected
//! per-slot net reward `service_reward · mu_i · 1{s>0} − cost_i −
//! holding_cost · s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;
use crate::scalar::Float;

/// Default number of grid cells accepted by [`grid_prior`].
pub const GRID_CELL_CAP: usize = 1_000_000;

/// Arrival-curve parameters of the state-dependent queue: the curve is
/// `lambda(s) = min(cap, kappa · exp(−(s − mu_bar)² / (2 sigma_bar²)))` with
/// `kappa` normalizing the maximum over the integer state grid to `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams<F> {
    /// Mean of the arrival curve, in state units.
    pub mu_bar: F,
    /// Width of the arrival curve, in state units.
    pub sigma_bar: F,
}

/// Fixed constants of the queue families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig<F> {
    /// Maximum occupancy `M`; states are `0..=M`.
    pub capacity: usize,
    /// Service success probability under SLOW (action 0).
    pub mu_slow: F,
    /// Service success probability under FAST (action 1).
    pub mu_fast: F,
    /// Per-slot cost of SLOW service.
    pub cost_slow: F,
    /// Per-slot cost of FAST service.
    pub cost_fast: F,
    /// Holding cost per queued packet per slot.
    pub holding_cost: F,
    /// Reward per successfully served packet.
    pub service_reward: F,
    /// Maximum arrival probability after normalization.
    pub lambda_cap: F,
}

impl<F: Float> QueueConfig<F> {
    fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::config("queue capacity must be positive"));
        }
        if !(F::zero() < self.mu_slow && self.mu_slow < self.mu_fast && self.mu_fast <= F::one()) {
            return Err(Error::config("need 0 < mu_slow < mu_fast <= 1"));
        }
        if !(F::zero() < self.lambda_cap && self.lambda_cap < F::one()) {
            return Err(Error::config("need 0 < lambda_cap < 1"));
        }
        Ok(())
    }

    fn service(&self, action: usize) -> (F, F) {
        match action {
            0 => (self.mu_slow, self.cost_slow),
            _ => (self.mu_fast, self.cost_fast),
        }
    }
}

/// Scalar arrival-rate parameter of the two-server queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoServerParams<F> {
    /// Bernoulli arrival probability per slot.
    pub theta: F,
}

/// Canonical transition parameters of the 2-state, 2-action family:
/// `p(state 1, action a, state 2) = p12_a` and
/// `p(state 2, action a, state 1) = p21_a` in 1-indexed labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateParams<F> {
    pub p12_a1: F,
    pub p21_a1: F,
    pub p12_a2: F,
    pub p21_a2: F,
}

impl<F: Float> TwoStateParams<F> {
    pub fn components(&self) -> [F; 4] {
        [self.p12_a1, self.p21_a1, self.p12_a2, self.p21_a2]
    }
}

/// Default clamp `upsilon` for two-state parameter components.
pub const TWO_STATE_UPSILON: f64 = 0.05;

/// The arrival curve of the state-dependent queue, evaluated on the integer
/// state grid `0..=capacity`.
pub fn arrival_curve<F: Float>(params: &QueueParams<F>, config: &QueueConfig<F>) -> Vec<F> {
    let two = F::of(2.0);
    let shape = |s: usize| {
        let d = F::of(s as f64) - params.mu_bar;
        (-(d * d) / (two * params.sigma_bar * params.sigma_bar)).exp()
    };
    let peak = (0..=config.capacity)
        .map(shape)
        .fold(F::neg_infinity(), F::max);
    let kappa = config.lambda_cap / peak;
    (0..=config.capacity)
        .map(|s| (kappa * shape(s)).min(config.lambda_cap))
        .collect()
}

fn build_queue_from_curve<F: Float>(lambda: &[F], config: &QueueConfig<F>) -> Result<FiniteMdp<F>> {
    config.validate()?;
    let m = config.capacity;
    let n = m + 1;
    let mut reward = vec![F::zero(); n * 2];
    let mut kernel = vec![F::zero(); n * 2 * n];
    for s in 0..n {
        let lam = lambda[s];
        for a in 0..2 {
            let (mu_raw, cost) = config.service(a);
            let mu = if s > 0 { mu_raw } else { F::zero() };
            let base = (s * 2 + a) * n;
            for (serve, p_serve) in [(0usize, F::one() - mu), (1, mu)] {
                if p_serve == F::zero() {
                    continue;
                }
                for (arrive, p_arrive) in [(0usize, F::one() - lam), (1, lam)] {
                    let next = (s + arrive).saturating_sub(serve).min(m);
                    kernel[base + next] += p_serve * p_arrive;
                }
            }
            reward[s * 2 + a] =
                config.service_reward * mu - cost - config.holding_cost * F::of(s as f64);
        }
    }
    FiniteMdp::new(n, 2, reward, kernel)
}

/// Queue with state-dependent arrivals `lambda(s)` shaped by `params`.
pub fn build_queue_mdp<F: Float>(
    params: &QueueParams<F>,
    config: &QueueConfig<F>,
) -> Result<FiniteMdp<F>> {
    if params.sigma_bar <= F::zero() {
        return Err(Error::config("sigma_bar must be positive"));
    }
    let lambda = arrival_curve(params, config);
    build_queue_from_curve(&lambda, config)
}

/// Two-server queue with constant arrival probability `theta`.
pub fn build_two_server_mdp<F: Float>(
    params: &TwoServerParams<F>,
    config: &QueueConfig<F>,
) -> Result<FiniteMdp<F>> {
    if params.theta < F::zero() || params.theta > F::one() {
        return Err(Error::config("theta must lie in [0, 1]"));
    }
    let lambda = vec![params.theta; config.capacity + 1];
    build_queue_from_curve(&lambda, config)
}

/// 2-state, 2-action chain with state-only rewards `(r1, r2)`, `r1 < r2`.
pub fn build_two_state_mdp<F: Float>(
    params: &TwoStateParams<F>,
    rewards: (F, F),
) -> Result<FiniteMdp<F>> {
    let (r1, r2) = rewards;
    if r1 >= r2 {
        return Err(Error::config("two-state family requires r1 < r2"));
    }
    for p in params.components() {
        if p < F::zero() || p > F::one() {
            return Err(Error::config("two-state parameters must lie in [0, 1]"));
        }
    }
    let reward = vec![r1, r1, r2, r2];
    let kernel = vec![
        // state 1 (index 0): stay / move to 2, per action
        F::one() - params.p12_a1,
        params.p12_a1,
        F::one() - params.p12_a2,
        params.p12_a2,
        // state 2 (index 1): move to 1 / stay, per action
        params.p21_a1,
        F::one() - params.p21_a1,
        params.p21_a2,
        F::one() - params.p21_a2,
    ];
    FiniteMdp::new(2, 2, reward, kernel)
}

/// Identifies which family a grid was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    Queue,
    TwoServer,
    TwoState,
}

/// A finite set of candidate parameters with one MDP per point. All MDPs
/// share the state space, action space and reward table; only kernels vary.
#[derive(Debug, Clone)]
pub struct ParamGrid<F> {
    points: Vec<FiniteMdp<F>>,
    labels: Vec<String>,
    coords: Vec<Vec<F>>,
}

impl<F: Float> ParamGrid<F> {
    /// Builds a grid from already-constructed MDPs and display labels.
    pub fn new(points: Vec<FiniteMdp<F>>, labels: Vec<String>, coords: Vec<Vec<F>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("parameter grid must be non-empty"));
        }
        if points.len() != labels.len() || points.len() != coords.len() {
            return Err(Error::config("grid points, labels and coordinates must align"));
        }
        let first = &points[0];
        if points.iter().any(|m| !m.same_shape(first)) {
            return Err(Error::config(
                "all grid MDPs must share state count, action count and rewards",
            ));
        }
        Ok(Self { points, labels, coords })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mdp(&self, index: usize) -> &FiniteMdp<F> {
        &self.points[index]
    }

    pub fn mdps(&self) -> &[FiniteMdp<F>] {
        &self.points
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    /// Raw parameter coordinates of a grid point (one entry per axis).
    pub fn coords(&self, index: usize) -> &[F] {
        &self.coords[index]
    }

    /// Index of the grid point whose coordinates equal `target` exactly.
    pub fn find_coords(&self, target: &[F]) -> Option<usize> {
        self.coords.iter().position(|c| c.as_slice() == target)
    }
}

/// Takes the Cartesian product of per-dimension axis values and instantiates
/// one family member per cell. Axis values are in the family's natural units
/// (state units for the queue curve, probabilities elsewhere).
pub fn grid_prior<F: Float>(
    family: FamilyKind,
    axes: &[Vec<F>],
    config: &QueueConfig<F>,
    two_state_rewards: (F, F),
) -> Result<ParamGrid<F>> {
    if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
        return Err(Error::config("grid axes must be non-empty"));
    }
    let cells: usize = axes.iter().map(Vec::len).product();
    if cells > GRID_CELL_CAP {
        return Err(Error::config(format!(
            "grid has {cells} cells, more than the cap {GRID_CELL_CAP}"
        )));
    }
    let expected_dims = match family {
        FamilyKind::Queue => 2,
        FamilyKind::TwoServer => 1,
        FamilyKind::TwoState => 4,
    };
    if axes.len() != expected_dims {
        return Err(Error::config(format!(
            "{family:?} family expects {expected_dims} axes, got {}",
            axes.len()
        )));
    }

    let mut points = Vec::with_capacity(cells);
    let mut labels = Vec::with_capacity(cells);
    let mut coords = Vec::with_capacity(cells);
    let mut idx = vec![0usize; axes.len()];
    loop {
        let coord: Vec<F> = idx.iter().zip(axes).map(|(&i, axis)| axis[i]).collect();
        let mdp = match family {
            FamilyKind::Queue => build_queue_mdp(
                &QueueParams { mu_bar: coord[0], sigma_bar: coord[1] },
                config,
            )?,
            FamilyKind::TwoServer => {
                build_two_server_mdp(&TwoServerParams { theta: coord[0] }, config)?
            }
            FamilyKind::TwoState => build_two_state_mdp(
                &TwoStateParams {
                    p12_a1: coord[0],
                    p21_a1: coord[1],
                    p12_a2: coord[2],
                    p21_a2: coord[3],
                },
                two_state_rewards,
            )?,
        };
        let label = coord
            .iter()
            .map(|v| format!("{}", v.as_f64()))
            .collect::<Vec<_>>()
            .join("x");
        points.push(mdp);
        labels.push(label);
        coords.push(coord);

        // odometer increment, last axis fastest
        let mut pos = axes.len();
        loop {
            if pos == 0 {
                return ParamGrid::new(points, labels, coords);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < axes[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}
