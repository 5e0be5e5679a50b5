use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MorError>;

/// Errors raised by the reduction toolkit.
#[derive(Debug, Error)]
pub enum MorError {
    #[error("dimension mismatch in {what}: {detail}")]
    Dimension { what: String, detail: String },

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix exponential overflow (norm of A*t = {norm:e})")]
    ExpmOverflow { norm: f64 },

    #[error(
        "singular matrix equation: eigenvalues {lambda} and {mu} nearly cancel \
         (|lambda + mu| = {gap:e} < {tol:e})"
    )]
    SingularEquation {
        lambda: String,
        mu: String,
        gap: f64,
        tol: f64,
    },

    #[error("matrix is not positive semidefinite: most negative eigenvalue {min_eig:e}")]
    NotPsd { min_eig: f64 },

    #[error("{0} is not symmetric")]
    NotSymmetric(String),

    #[error("system matrix is not Hurwitz; eigenvalues with nonnegative real part: {0}")]
    NotHurwitz(String),

    #[error("spectrum condition {condition} violated (min |lambda + mu| = {gap:e})")]
    SpectrumViolation { condition: String, gap: f64 },

    #[error("requested order {requested} exceeds the available order {available}")]
    Order { requested: usize, available: usize },

    #[error("degenerate Gramians: {0}")]
    Degenerate(String),

    #[error("{0} is rank deficient; use the projection route (balance) instead of a full transform")]
    RankDeficient(String),

    #[error("verification path unavailable: {0}")]
    VerificationUnavailable(String),

    #[error("numerically inconsistent bound: radicand {radicand:e} below clamp window {window:e}")]
    NumericalInconsistency { radicand: f64, window: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("Schur decomposition did not converge for {0}")]
    NoConvergence(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
}

impl MorError {
    pub(crate) fn dim(what: impl Into<String>, detail: impl Into<String>) -> Self {
        MorError::Dimension {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MorError::Io {
            path: path.into(),
            source,
        }
    }
}
