//! Error taxonomy shared by the solvers, simulators and analysis routines.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes surfaced by this crate.
///
/// The CLI maps these onto process exit codes, so the distinction between
/// configuration problems, numerical breakdown and the infinite-constant flag
/// is part of the public contract.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent inputs (dimension mismatches, bad weights,
    /// invalid parameter combinations).
    #[error("configuration error: {0}")]
    Config(String),

    /// A documented precondition was violated (reducible chain, transient
    /// start state, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative method failed to converge; carries the residual reached.
    #[error("numerical error: {msg} (residual {residual:.3e})")]
    Numerical { msg: String, residual: f64 },

    /// A simulation exceeded a runtime guard such as the epoch cycle cap.
    #[error("runtime error: {0}")]
    Runtime(String),

    /// An instance exceeds a configured enumeration cap.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// The regret-constant optimization has value infinity (a suboptimal
    /// region point has zero own-policy divergence).
    #[error("regret constant is infinite: {0}")]
    InfiniteConstant(String),

    /// A certificate supplied for a bound does not hold on the instance.
    #[error("validation error: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical { msg: msg.into(), residual }
    }
}
