use thiserror::Error;

/// Errors raised by the estimators, constructions and I/O layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The local design matrix is too close to singular to invert.
    #[error("singular design at x = {x}: smallest eigenvalue {min_eigenvalue:e} (enlarge the bandwidth)")]
    SingularDesign { x: f64, min_eigenvalue: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// Randomised packing search ran out of candidate draws.
    #[error("packing search exhausted after {attempts} candidates ({found} of {target} codewords found)")]
    SearchExhausted {
        attempts: u64,
        found: usize,
        target: usize,
    },

    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
