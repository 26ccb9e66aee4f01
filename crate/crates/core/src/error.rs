use std::path::PathBuf;

/// Errors produced by the toolkit.
///
/// Every variant maps to a short category string (see [`Error::category`])
/// which front ends print in machine-parseable form.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("enumeration limit: pool of {pool} models exceeds the cap of {cap}")]
    EnumerationLimit { pool: usize, cap: usize },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Parse { .. } => "parse",
            Error::Shape(_) => "shape",
            Error::Validation(_) => "validation",
            Error::Diverged { .. } => "diverged",
            Error::EmptyResult(_) => "empty",
            Error::EnumerationLimit { .. } => "enumeration-limit",
            Error::NotFound(_) => "not-found",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
