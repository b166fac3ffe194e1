//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failure modes of the pipeline, grouped by the stage that detects them.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a documented precondition.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// The self-consistent field iteration did not converge.
    #[error("SCF did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        /// Potential residual after every iteration.
        history: Vec<f64>,
    },
    /// A numerical solver produced an unusable result.
    #[error("solver error: {0}")]
    Solver(String),
    /// A linear-algebra operation failed (singular factorization, bad shape).
    #[error("operator error: {0}")]
    Operator(String),
    /// Two independent evaluations of the same quantity disagree.
    #[error("convention mismatch: {0}")]
    Convention(String),
    /// An eigenvalue fell below the clamping window before a matrix root.
    #[error("clamping error: eigenvalue {value:.3e} in sector {sector} is below -1e-6")]
    Clamping { sector: usize, value: f64 },
    /// A truncated sum or extrapolation is not trustworthy.
    #[error("truncation error: {0}")]
    Truncation(String),
    /// A sampled object is not resolved by the chosen discretization.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// A quadrature could not be completed.
    #[error("integration error: {0}")]
    Integration(String),
    /// A persisted artifact failed its integrity or version checks.
    #[error("provenance error: {0}")]
    Provenance(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
