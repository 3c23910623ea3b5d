use std::path::PathBuf;

use crate::spectral::SineSeries;

/// Errors raised across the library.
///
/// The CLI maps `Domain`, `Regime` and `Symmetry` to exit code 1 and
/// `Numeric`, `Solver` and `Consistency` to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("numeric failure: {message} (achieved {achieved:.3e})")]
    Numeric { message: String, achieved: f64 },

    #[error("solver failed: {}", .0.message)]
    Solver(Box<SolverFailure>),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("symmetry error: {0}")]
    Symmetry(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            achieved,
        }
    }
}

/// Best iterate and residual history of a solve that did not converge.
#[derive(Debug, Clone)]
pub struct SolverFailure {
    pub message: String,
    pub best: SineSeries,
    pub grad_norm: f64,
    pub trace: Vec<f64>,
}

pub type Result<T> = std::result::Result<T, Error>;
