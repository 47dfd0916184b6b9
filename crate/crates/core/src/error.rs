use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error at row {row}, column `{column}`: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("batch composition: {0}")]
    BatchComposition(String),

    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible budget {budget}: minimum attainable cost is {minimum}")]
    Infeasible { budget: f64, minimum: f64 },

    #[error("instance too large for exact oracle: {0}")]
    Capacity(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("metric domain error: {0}")]
    MetricDomain(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
