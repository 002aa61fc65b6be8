//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear system that the contract requires to be solvable was singular.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// A filter whose likelihood bias is needed has determinant zero.
    #[error("degenerate filter: det(I - StW) = 0")]
    DegenerateFilter,

    /// Least-squares diagonalization of a filter bank sample failed.
    #[error("filter decomposition failed for grid sample {index}: {reason}")]
    DecompositionFailure { index: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Byte-level decode failures for the channel/snapshot file formats.
    #[error("decode error at offset {offset}: {reason}")]
    Decode { offset: usize, reason: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn decode(offset: usize, reason: impl Into<String>) -> Self {
        Error::Decode {
            offset,
            reason: reason.into(),
        }
    }
}
