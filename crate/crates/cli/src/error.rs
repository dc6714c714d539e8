use std::path::PathBuf;

use imstitch_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: CoreError,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_INPUT,
            CliError::Core(e) | CliError::File { source: e, .. } => core_exit_code(e),
        }
    }
}

/// Exit code for a library error.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidInput(_)
        | CoreError::Parse { .. }
        | CoreError::Io(_)
        | CoreError::Json(_)
        | CoreError::Csv(_) => EXIT_INPUT,
        CoreError::CalibrationFailed { .. } => EXIT_CALIBRATION,
        CoreError::ModelViolation(_)
        | CoreError::BoundaryDivergence(_)
        | CoreError::OracleDegraded { .. }
        | CoreError::InvalidRanking(_)
        | CoreError::EmptyInterval { .. } => EXIT_MODEL,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
