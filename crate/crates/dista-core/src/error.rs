//! Crate-wide error type.
//!
//! Every fallible operation in this crate reports through [`Error`]. The
//! variants are coarse on purpose: callers either recover by fixing their
//! inputs (parameters, shapes, stepsizes) or they surface the message.

use std::fmt;

/// Errors produced by numerics, solvers, and the experiment harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar or structural parameter is out of its documented range.
    InvalidParameter(String),
    /// Two operands have incompatible dimensions.
    ShapeMismatch(String),
    /// An input contains NaN or infinite entries where finite values are required.
    NonFinite(String),
    /// A stepsize violates the spectral bound required for convergence.
    /// Carries the first offending node, its stepsize, and the bound.
    StepsizeViolation {
        node: usize,
        tau: f64,
        bound: f64,
    },
    /// Power iteration did not settle within its iteration budget; carries
    /// the last estimate so callers can judge how bad the miss is.
    NormEstimate {
        last: f64,
        iterations: usize,
    },
    /// An internal quantity that must stay finite diverged. This indicates a
    /// bug or a forced run outside the supported parameter regime.
    Diverged(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite input: {msg}"),
            Error::StepsizeViolation { node, tau, bound } => write!(
                f,
                "stepsize violation at node {node}: tau = {tau} but convergence requires tau < {bound}"
            ),
            Error::NormEstimate { last, iterations } => write!(
                f,
                "operator norm estimate did not converge after {iterations} iterations (last estimate {last})"
            ),
            Error::Diverged(msg) => write!(f, "diverged: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
