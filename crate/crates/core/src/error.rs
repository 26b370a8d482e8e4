//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model, problem or run configuration is inconsistent. The string names the field.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument is outside the domain of the operation.
    #[error("argument error: {0}")]
    Argument(String),
    /// A numerical solver failed (instability, shooting without convergence, ...).
    #[error("solver error: {0}")]
    Solver(String),
    /// The discretization cannot resolve the requested problem.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// Evaluation outside the finite range of a function.
    #[error("range error: {0}")]
    Range(String),
    /// A Monte Carlo denominator collapsed to (numerically) zero.
    #[error("degenerate denominator: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the `lfk` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Io(_) => 2,
            Error::Solver(_) | Error::Range(_) | Error::Degenerate(_) => 3,
            Error::Resolution(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
