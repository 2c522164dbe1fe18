use std::process::ExitCode;

use senscomm_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or an invalid option combination.
    #[error("{0}")]
    Input(String),

    /// The input is valid but the requested method does not apply to it.
    #[error("{0}")]
    Precondition(String),

    /// A verification check failed; the report has already been printed.
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Verification(_) => ExitCode::from(1),
            CliError::Input(_) => ExitCode::from(2),
            CliError::Precondition(_) => ExitCode::from(3),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Ordering(_)
            | CoreError::BelowFullSamplingBudget { .. }
            | CoreError::Infeasible(_) => CliError::Precondition(err.to_string()),
            CoreError::InvalidInput(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::GridTooLarge { .. } => CliError::Input(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
