use std::path::PathBuf;

use thiserror::Error;

use crate::fd::FitError;
use crate::geom::GeometryError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("drone {drone} at step {step}: {source}")]
    Simulation {
        drone: u32,
        step: usize,
        #[source]
        source: GeometryError,
    },

    #[error("{location}: {reason}")]
    DataIntegrity { location: String, reason: String },

    #[error(transparent)]
    Fit(#[from] FitError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn integrity(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::DataIntegrity { location: location.into(), reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for command-line use.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::DataIntegrity { .. } => 3,
            Error::Geometry(_) | Error::Simulation { .. } | Error::Fit(_) => 4,
            Error::Io { .. } => 1,
        }
    }
}
