use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: expected {expected} covariates, got {got}")]
    Schema { expected: usize, got: usize },

    #[error("row {row} is in-bag for every tree; no OOB prediction exists")]
    NoOobTrees { row: usize },

    #[error("ingestion error at row {row}, column '{column}': {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("ingestion error: {0}")]
    Format(String),

    #[error("inference failed: {0}")]
    Inference(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E_CONFIG",
            Error::Schema { .. } => "E_SCHEMA",
            Error::NoOobTrees { .. } => "E_NO_OOB",
            Error::Ingest { .. } | Error::Format(_) | Error::Csv(_) => "E_INGEST",
            Error::Inference(_) => "E_INFERENCE",
            Error::Io(_) => "E_IO",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
