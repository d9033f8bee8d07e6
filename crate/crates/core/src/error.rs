use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh needs at least one subdivision per side")]
    EmptyMesh,

    #[error("element {element} is degenerate (signed area {area:e})")]
    DegenerateElement { element: usize, area: f64 },

    #[error("element index {0} out of range")]
    ElementOutOfRange(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("solver did not reach tolerance {tol:e}: relative residual {residual:e} after {iterations} iterations")]
    NotConverged {
        tol: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
