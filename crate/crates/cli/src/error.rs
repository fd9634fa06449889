use std::path::PathBuf;

use spectr_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid problem file at `{field}`: {message}")]
    Parse { path: PathBuf, field: String, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error("{0}")]
    Infeasible(String),

    #[error("{0}")]
    NotConverged(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Invalid(_) => EXIT_INPUT,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Core(e) => match e {
                CoreError::Infeasible(_) | CoreError::RepairFailed | CoreError::InfeasiblePerturbation => EXIT_INFEASIBLE,
                CoreError::DomainViolation { .. } | CoreError::Numerical(_) => EXIT_NOT_CONVERGED,
                _ => EXIT_INPUT,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
