//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Hazard signal values must be finite and inside [0, 1].
    #[error("invalid hazard signal value {value} at index {index}: must be finite and in [0, 1]")]
    InvalidSignal { index: usize, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("network construction failed: {0}")]
    Network(String),

    #[error("{path}:{row}: {reason}")]
    DataRow {
        path: String,
        row: usize,
        reason: String,
    },

    #[error("data error in {path}: {reason}")]
    Data { path: String, reason: String },

    #[error("series misalignment: {0}")]
    Misaligned(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
