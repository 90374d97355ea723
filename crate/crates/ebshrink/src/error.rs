use thiserror::Error;

/// Errors surfaced by construction, fitting, and evaluation routines.
///
/// Non-convergence of iterative fits is deliberately *not* an error: fits
/// return a [`crate::fit::FitReport`] with `converged = false` instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid prior descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("unsupported family for this operation: {0}")]
    UnsupportedFamily(String),

    #[error("invalid observations: {0}")]
    InvalidObservations(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate range: all observations identical")]
    DegenerateRange,

    #[error("invalid bandwidth: must be positive, got {0}")]
    InvalidBandwidth(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("evaluation point {y} outside declared domain [{lo}, {hi}]")]
    DomainError { y: f64, lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure in {context}: {detail}")]
    NumericalFailure { context: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
