use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::npy::NpyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Npy {
        path: PathBuf,
        #[source]
        source: NpyError,
    },
    #[error(transparent)]
    Core(#[from] vtprune_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: invalid result document: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn npy(path: impl Into<PathBuf>, source: NpyError) -> Self {
        match source {
            NpyError::Io(source) => Error::Io { path: path.into(), source },
            source => Error::Npy { path: path.into(), source },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 1 for I/O failures, 2 for everything the caller
    /// can fix by changing flags or inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Error::Npy { source, .. } => source.name(),
            Error::Core(e) => e.name(),
            Error::Io { .. } => "Io",
            Error::Json { .. } => "Json",
            Error::Usage(_) => "Usage",
        }
    }
}
