use thiserror::Error;

/// Errors raised by the numerical routines. Every variant is a rejected input;
/// none of the operations fail on well-formed data.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid exponent {0}: exponents must be at least 1")]
    InvalidExponent(f64),

    #[error("sign enumeration needs {needed} signs, cutoff is {cutoff}")]
    SignBudget { needed: usize, cutoff: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
