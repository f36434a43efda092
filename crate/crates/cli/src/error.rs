use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] ald::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for anything wrong with the inputs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Core(ald::Error::Config(_) | ald::Error::Parameter(_)) => 2,
            HarnessError::Core(_) | HarnessError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
