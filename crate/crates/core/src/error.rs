use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the trajectory, encoding and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error in {file}:{line}: {reason}")]
    Parse {
        file: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("schema error in {file}: {reason}")]
    Schema { file: PathBuf, reason: String },

    #[error(
        "goal lies outside the affine span of the demonstration goals (residual {residual:.3e})"
    )]
    Infeasible { residual: f64 },

    #[error("mixture fit failed: {0}")]
    Fit(String),

    #[error("conditioning failed: {0}")]
    Conditioning(String),

    #[error("frame combination failed: {0}")]
    Combination(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
