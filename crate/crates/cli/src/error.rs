use std::path::PathBuf;

use loopsplit_core::LoopError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed JSON or a field of the wrong type, with the key path where it happened.
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Numerical(LoopError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Validation(_) | Self::Io { .. } => exit::VALIDATION,
            Self::Numerical(_) => exit::NUMERICAL,
        }
    }
}

impl From<LoopError> for CliError {
    fn from(e: LoopError) -> Self {
        match e {
            LoopError::Invalid(msg) => Self::Validation(msg),
            LoopError::DimensionMismatch { .. } => Self::Validation(e.to_string()),
            other => Self::Numerical(other),
        }
    }
}

pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Some nodes were masked, or a mesh had nothing to draw.
    pub const PARTIAL: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

pub type CliResult<T> = std::result::Result<T, CliError>;
