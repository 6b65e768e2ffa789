//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated (out-of-range index,
    /// malformed grid, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested point lies outside the operation's analytic domain
    /// (e.g. an Euler product at Re s ≤ 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// The request would exceed the configured memory budget.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Adaptive quadrature failed to reach its tolerance; the offending
    /// segment is carried so callers can report it.
    #[error("quadrature did not converge on [{a}, {b}] (estimate {estimate:.3e}, tol {tol:.3e})")]
    Quadrature { a: f64, b: f64, estimate: f64, tol: f64 },

    /// Too few usable checkpoints to fit a growth exponent.
    #[error("exponent fit undefined: {0}")]
    FitUndefined(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
