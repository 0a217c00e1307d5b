//! Error type shared by the library.

use thiserror::Error;

/// Errors reported by system construction, parameter selection and solvers.
#[derive(Debug, Error)]
pub enum SeError {
    #[error("input/output failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed particle file at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    #[error("tolerance unreachable: {0}")]
    Unreachable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, SeError>;
