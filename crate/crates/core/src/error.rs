use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("symbol is not uniformly strongly elliptic: sampled constant {c:e} over {directions} directions")]
    NotElliptic { c: f64, directions: usize },

    #[error("Lebesgue chain truncated at depth {achieved} (requested {requested})")]
    ChainTruncated { achieved: usize, requested: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("integration failed: {message} (error estimate {estimate:e})")]
    Integration { message: String, estimate: f64 },

    #[error("frequency shear aliasing: spill {spill:e} exceeds tolerance {tolerance:e}")]
    Aliasing { spill: f64, tolerance: f64 },

    #[error("malformed config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
