//! Error type shared by the whole crate.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Invalid argument or query (bad depth, missing coverage, out-of-range
    /// parameter).
    Parameter(String),
    /// The model definition itself is inconsistent (probabilities do not
    /// normalize, offspring mean violates criticality).
    InvalidModel(String),
    /// A computation would exceed a hard cost or memory guard.
    ResourceGuard(String),
    /// The requested operation is not defined for this model kind.
    Unsupported(String),
    /// A quantity required to be bounded away from zero degenerates
    /// (e.g. the per-direction variance of a degenerate model).
    DegenerateModel(String),
}

impl Error {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::InvalidModel(_) => "model-invalid",
            Error::ResourceGuard(_) => "resource-guard",
            Error::Unsupported(_) => "unsupported",
            Error::DegenerateModel(_) => "degenerate-model",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Error::Parameter(m)
            | Error::InvalidModel(m)
            | Error::ResourceGuard(m)
            | Error::Unsupported(m)
            | Error::DegenerateModel(m) => m,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind_str(), self.message())
    }
}

#[cfg(test)]
impl std::error::Error for Error {}
