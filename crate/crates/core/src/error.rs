use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or algorithm parameter is outside its admissible domain.
    #[error("parameter `{name}` = {value} is out of domain: {constraint}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// A replicate produced a sample on which an estimator is undefined
    /// (zero within/between variation, zero residual variance, ...).
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    /// Shapes of panel arrays do not agree.
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    /// An iterative numerical routine failed.
    #[error("numerical failure in {routine}: {detail}")]
    Numerical {
        routine: &'static str,
        detail: String,
    },

    /// Too many replicates were rejected as degenerate.
    #[error("{rejected} of {total} replicates were degenerate (limit 0.1%)")]
    TooManyDegenerate { rejected: usize, total: usize },

    /// Invalid user-facing configuration.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::ParameterDomain {
            name,
            value,
            constraint,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParameterDomain { .. } | Error::Config { .. } | Error::Io { .. } => 2,
            Error::DegenerateSample(_)
            | Error::Shape { .. }
            | Error::Numerical { .. }
            | Error::TooManyDegenerate { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
