use thiserror::Error;

use crate::spectra::IsospectralReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value does not fit the fixed-width arithmetic or exceeds a
    /// configured size limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("spectra are not completely isospectral: {} unmatched pair(s)", .0.unmatched.len())]
    NotIsospectral(Box<IsospectralReport>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
