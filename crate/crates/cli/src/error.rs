use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Diverged(String),

    #[error("io error on {path}: {reason}")]
    Io { path: PathBuf, reason: String },

    #[error("bad input data: {0}")]
    Data(String),

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io { .. } | CliError::Data(_) => 4,
            CliError::Failed(_) => 1,
        })
    }

    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            reason: e.to_string(),
        }
    }
}

impl From<landscape::Error> for CliError {
    fn from(e: landscape::Error) -> Self {
        match e {
            landscape::Error::Io { path, source } => CliError::io(path, source),
            landscape::Error::InvalidArgument(msg) => CliError::Config(msg),
            landscape::Error::Format { .. } => CliError::Data(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
