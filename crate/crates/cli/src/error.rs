use std::path::{Path, PathBuf};

use bias_core::BiasError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] BiasError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("{}: {message}", path.display())]
    Dataset { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn decode(path: impl AsRef<Path>, message: impl ToString) -> Self {
        CliError::Decode {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn dataset(path: impl AsRef<Path>, message: impl ToString) -> Self {
        CliError::Dataset {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }

    /// Short stable tag for the one-line error report.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Engine(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Decode { .. } => "decode",
            CliError::Dataset { .. } => "dataset",
            CliError::Usage(_) => "usage",
        }
    }
}
