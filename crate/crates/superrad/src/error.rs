//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured size limit would be exceeded.
    #[error("resource cap exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: String,
        requested: usize,
        cap: usize,
    },

    /// Configuration problems, all of them at once.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    /// Integrator or eigensolver failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
