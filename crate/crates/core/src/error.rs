use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("requested {requested} items but only {available} are available")]
    Capacity { requested: usize, available: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("gateway error: {0}")]
    Gateway(String),

    #[error("retrieval failed for pmids {pmids:?}: {message}")]
    Retrieval { pmids: Vec<u64>, message: String },

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("referential integrity: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable code, used by the failure ledger and the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::NotFound(_) => "not_found",
            Error::Capacity { .. } => "capacity",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Gateway(_) => "gateway",
            Error::Retrieval { .. } => "retrieval",
            Error::Annotation(_) => "annotation",
            Error::Integrity(_) => "integrity",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
