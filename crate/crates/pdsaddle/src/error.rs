//! Error type shared by the whole crate.

use std::fmt;

/// Errors produced by field operations, problem builders and solver runs.
#[derive(Debug)]
pub enum PdError {
    /// Shape or field-kind mismatch between operands.
    Shape(String),
    /// A parameter violates its documented precondition.
    Invalid(String),
    /// The iterate norm exceeded the divergence guard.
    Diverged { iter: usize, norm: f64 },
    /// A dual iterate lies outside its constraint set beyond tolerance,
    /// which indicates a broken proximal step rather than bad data.
    DualInfeasible { excess: f64 },
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// Malformed file contents (e.g. a truncated PGM header).
    Format(String),
}

pub type PdResult<T> = Result<T, PdError>;

impl fmt::Display for PdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PdError::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            PdError::Invalid(msg) => write!(f, "invalid parameter: {msg}"),
            PdError::Diverged { iter, norm } => {
                write!(f, "iterates diverged at iteration {iter} (norm {norm:.3e})")
            }
            PdError::DualInfeasible { excess } => {
                write!(f, "dual iterate infeasible (constraint excess {excess:.3e})")
            }
            PdError::Io(err) => write!(f, "i/o error: {err}"),
            PdError::Format(msg) => write!(f, "format error: {msg}"),
        }
    }
}

impl std::error::Error for PdError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            PdError::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for PdError {
    fn from(err: std::io::Error) -> Self {
        PdError::Io(err)
    }
}
