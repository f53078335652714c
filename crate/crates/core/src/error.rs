use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid tube parameters: {0}")]
    InvalidTube(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid under-resolved on axis `{axis}`: spacing {spacing:.6e} exceeds {limit:.6e}; need count >= {required_count}")]
    UnderResolved {
        axis: String,
        spacing: f64,
        limit: f64,
        required_count: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("wave functions or operators live on different grids")]
    GridMismatch,

    #[error("region `{0}` is not defined on this grid")]
    UnsupportedRegion(String),

    #[error("diagnostic `{0}` is not defined on this grid")]
    UnsupportedDiagnostic(&'static str),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("norm drift {drift:.3e} at t = {time} exceeds 1e-6")]
    NormDrift { drift: f64, time: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("dimension {dimension} exceeds the dense limit {limit}")]
    TooLarge { dimension: usize, limit: usize },

    #[error("rate fit: {0}")]
    Fit(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {reason}")]
    Data { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
