//! Thompson sampling for parameterized average-reward MDPs.
//!
//! The crate has three layers:
//!
//! - tabular MDP machinery ([`mdp`]) and parameterized families
//!   ([`families`]) that map parameter points to MDPs;
//! - online agents ([`agents`]): a posterior-sampling agent that resamples at
//!   recurrence epochs of a start state, and a UCRL2 baseline, both emitting
//!   regret time series;
//! - offline analysis ([`analysis`], [`concentration`]): marginal KL
//!   divergences, decision regions, the regret-scaling-constant optimization
//!   and explicit bounds on it, plus an empirical harness for the
//!   iterated-logarithm concentration envelopes the regret analysis rests on.
//!
//! Everything numeric is generic over the scalar type through [`Float`];
//! the aliases below pin the default `f64` instantiation.

pub mod agents;
pub mod analysis;
pub mod concentration;
pub mod error;
pub mod families;
mod linalg;
pub mod mdp;
pub mod posterior;
mod scalar;

pub use error::{Error, Result};
pub use linalg::affine_fit;
pub use scalar::Float;

/// Tabular MDP over `f64`.
pub type Mdp = mdp::FiniteMdp<f64>;
/// Induced Markov chain over `f64`.
pub type Chain = mdp::InducedChain<f64>;
/// Parameter grid over `f64`.
pub type Grid = families::ParamGrid<f64>;
/// Posterior state over `f64`.
pub type Posterior = posterior::PosteriorState<f64>;
