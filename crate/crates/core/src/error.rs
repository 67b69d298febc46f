use std::path::PathBuf;

use crate::force::ForceModel;

/// Errors produced by the tactile pipeline, trainers and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient samples: have {have}, need {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("solver did not converge after {iterations} iterations (KKT gap {gap:.3e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        best: Box<ForceModel>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data (as opposed to bad usage).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Io { .. } | Error::Csv(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
