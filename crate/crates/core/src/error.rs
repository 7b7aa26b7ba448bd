use std::fmt;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value failed validation. Carries the offending key.
    #[error("invalid config value for `{field}`: {msg}")]
    Validation { field: String, msg: String },

    /// A mandatory configuration key was absent.
    #[error("missing config field `{0}`")]
    MissingField(String),

    /// Malformed input text (config or time-tag file).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A numerical routine failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Measured values are mutually inconsistent under the model.
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    /// A spectral fit could not be performed.
    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub fn numerical(msg: impl fmt::Display) -> Self {
        Error::Numerical(msg.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
