use std::path::PathBuf;

use csdf_core::Error as CoreError;
use thiserror::Error;

/// Failure of one CLI run. Each category has its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;

/// Exit codes, also listed in the README.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const CONFIG: i32 = 4;
    pub const FORMAT: i32 = 5;
    pub const INPUT: i32 = 6;
    pub const NUMERIC: i32 = 7;
}

impl CliError {
    /// Machine-parseable category and its exit code.
    pub fn category(&self) -> (&'static str, i32) {
        match self {
            CliError::Usage(_) => ("usage", exit::USAGE),
            CliError::Config { .. } => ("config", exit::CONFIG),
            CliError::Core(e) => match e {
                CoreError::Io { .. } => ("io", exit::IO),
                CoreError::Format { .. } => ("format", exit::FORMAT),
                CoreError::InvalidConfig(_) | CoreError::KernelTooLarge { .. } => {
                    ("config", exit::CONFIG)
                }
                CoreError::Diverged { .. } => ("numeric", exit::NUMERIC),
                CoreError::InvalidGrid(_)
                | CoreError::InvalidShape(_)
                | CoreError::Domain(_)
                | CoreError::DimensionMismatch(_)
                | CoreError::EmptyInput(_) => ("input", exit::INPUT),
            },
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Core(CoreError::Io {
            path: path.into(),
            source,
        })
    }
}
