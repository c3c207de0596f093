use gradcode_core::Error as CoreError;

use crate::scheme::ParseError;

/// Command failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or contradictory arguments (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Inputs that parse but violate a precondition (exit 3).
    #[error("{0}")]
    Validation(String),
    /// Decoding, conditioning or divergence failures (exit 4).
    #[error("{0}")]
    Numerical(String),
    /// Filesystem errors (exit 5).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SingularSystem { .. }
            | CoreError::SpanFailure { .. }
            | CoreError::RetryExhausted { .. }
            | CoreError::NonFinite(_)
            | CoreError::Diverged { .. }
            | CoreError::ExactnessViolation { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
