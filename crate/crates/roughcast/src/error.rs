//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid input data or arguments (shape mismatches, broken invariants).
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed on-disk dataset or report layout.
    #[error("format error: {0}")]
    Format(String),

    /// I/O failure with the path it occurred on.
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// Every trial of a hyperparameter study failed.
    #[error("study failed: all {n_trials} trials failed")]
    StudyFailed { n_trials: usize },

    /// R² is undefined because the target has zero variance.
    #[error("degenerate target: zero variance")]
    DegenerateTarget,

    /// A request exceeds a hard capacity limit (e.g. exact Shapley dimension).
    #[error("capacity error: {0}")]
    Capacity(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 validation, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::TrainingDiverged { .. } | Error::StudyFailed { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
