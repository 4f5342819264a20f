//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, estimation, and sampling.
///
/// `InvalidParameter` and `DimensionMismatch` are contract violations by the
/// caller; `RankDeficient` and `Degenerate` are data-driven numerical
/// conditions that a caller may want to handle (a rank-deficient graph, for
/// instance, simply has mass zero).
#[derive(Debug, Error)]
pub enum EasError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A per-equation Gram block failed its Cholesky pivot test. The graph is
    /// unusable for mass computation.
    #[error("equation {equation}: rank-deficient predictor block ({detail})")]
    RankDeficient { equation: usize, detail: String },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, EasError>;

impl EasError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        EasError::InvalidParameter(msg.into())
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        EasError::DimensionMismatch(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        EasError::Degenerate(msg.into())
    }
}
