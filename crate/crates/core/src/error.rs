use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid solver or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A field went non-finite during time stepping.
    #[error("numerical instability at step {step}: {detail}")]
    Instability { step: usize, detail: String },

    /// Factorization or decomposition could not be completed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Kernel matrix could not be factorized even at maximal jitter.
    #[error("conditioning error: kernel matrix not positive definite at jitter {jitter:e}")]
    Conditioning { jitter: f64 },

    /// Every optimizer restart failed.
    #[error("GP training failed: {0}")]
    Training(String),

    #[error("FMX format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Wraps a lower-level error with pipeline context (phase, parameter point, mode index).
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 validation, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Validation(_) => 1,
            Error::Instability { .. }
            | Error::Numerical(_)
            | Error::Conditioning { .. }
            | Error::Training(_) => 2,
            Error::Format { .. } | Error::Io { .. } => 3,
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: &str) -> Result<T>;
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: &str) -> Result<T> {
        self.map_err(|e| e.context(context))
    }

    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}
