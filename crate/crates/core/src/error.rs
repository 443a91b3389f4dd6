use thiserror::Error;

/// Errors raised across the simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric parameter is out of its admissible domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The caller supplied inconsistent or empty inputs.
    #[error("usage error: {0}")]
    Usage(String),

    /// The model cannot be materialized (nonpositive eigenvalue, N = 0, ...).
    #[error("structural error: {0}")]
    Structural(String),

    /// Picard iteration ran out of iterations.
    #[error(
        "picard iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    Convergence { iterations: usize, residual: f64 },

    /// Too few usable points for a fit.
    #[error("insufficient data: {usable} usable points ({dropped} below noise floor), need at least {needed}")]
    InsufficientData {
        usable: usize,
        dropped: usize,
        needed: usize,
    },

    /// A trajectory produced a non-finite coordinate.
    #[error("trajectory blown up at step {step} (mode {mode})")]
    Blown { step: usize, mode: usize },

    #[error("unknown {kind} '{name}' (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
