use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A room or config file failed to parse.
    #[error("format error in {path}: {message}", path = .path.display())]
    Format { path: PathBuf, message: String },

    /// A parsed room violates a geometric invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("pressure solve did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { residual: f64, iterations: usize },

    #[error("stability error: {0}")]
    Stability(String),

    #[error("injection error: {0}")]
    Injection(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("config key `{key}` expects {expected}, got {found}")]
    TypeMismatch {
        key: String,
        expected: String,
        found: String,
    },

    #[error("config file {path} not found", path = .0.display())]
    MissingConfig(PathBuf),

    #[error("at step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The underlying error, with step and realization context removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } | Error::Realization { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_realization(self, index: usize) -> Self {
        Error::Realization {
            index,
            source: Box::new(self),
        }
    }
}
