use std::process::ExitCode;

use esrstm_core::Error as CoreError;

/// Exit-code classes: 1 soft analysis failure, 2 usage or config error, 3 I/O.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Soft(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Soft(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        })
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Analysis(_) | CoreError::Numeric(_) => CliError::Soft(e.to_string()),
            CoreError::Domain(_) | CoreError::Construction(_) | CoreError::Precondition(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
