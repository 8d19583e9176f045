use std::path::PathBuf;

/// Errors raised by trace analysis, spectral routines and the testbeds.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt payload: {0}")]
    Corruption(String),

    #[error("non-finite value at row {row}, step {step}")]
    NonFinite { row: usize, step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("undefined {metric}: {reason}")]
    Undefined {
        metric: &'static str,
        reason: String,
    },

    #[error("no convergence after {sweeps} sweeps (off-diagonal ratio {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("divergence at step {step}: {what}")]
    Divergence { step: usize, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit status for this error class: 2 input/config, 3 undefined
    /// metric, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Undefined { .. } => 3,
            Error::NonConvergence { .. } | Error::Divergence { .. } => 4,
            _ => 2,
        }
    }
}
