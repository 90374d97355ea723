use thiserror::Error;

/// CLI failure modes with their contractual exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid input, config, or I/O problem (exit 2).
    #[error("{0}")]
    Invalid(String),
    /// A strict-mode diagnostic returned not-realizable (exit 4).
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
    /// A strict-mode fit did not converge (exit 5).
    #[error("non-convergence: {0}")]
    NonConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Diagnostic(_) => 4,
            CliError::NonConverged(_) => 5,
        }
    }

    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        CliError::Invalid(msg.to_string())
    }
}

impl From<ebshrink::Error> for CliError {
    fn from(e: ebshrink::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Invalid(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Invalid(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
