//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors raised by samplers, estimators and simulators.
#[derive(Debug, Error)]
pub enum SimError {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A model definition violates one of its structural invariants
    /// (non-stochastic rows, negative propensities, asymmetric covariance, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An iterative method did not reach its tolerance.
    #[error("did not converge: {0} (residual {1:e})")]
    NoConvergence(String, f64),

    /// A numerical diagnostic fired during a run (envelope violation,
    /// non-finite state, importance-sampling support violation, ...).
    #[error("numerical diagnostic: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
