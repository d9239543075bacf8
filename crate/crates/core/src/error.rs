use std::path::PathBuf;

use thiserror::Error;

use crate::pipelines::OutputError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by the stage that produced them so the CLI can map
/// them onto exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("reference normalization error: {0}")]
    Normalization(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("community detection error: {0}")]
    Community(String),

    #[error("embedding error for atoms {indices:?}: {message}")]
    Embedding { indices: Vec<usize>, message: String },

    #[error("template error: {0}")]
    Template(String),

    #[error("pipeline output rejected: {0}")]
    Output(#[from] OutputError),

    #[error("pipeline failed after {attempts} attempts: {message}")]
    PipelineFailed {
        attempts: usize,
        message: String,
        raw_output: String,
    },

    #[error("generation service error: {0}")]
    Generation(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("resolver error: {0}")]
    Resolver(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for data problems, 3 for failures
    /// of an external service (generator, embedder, resolver).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Embedding { .. } | Error::Generation(_) | Error::PipelineFailed { .. } | Error::Resolver(_) => 3,
            _ => 2,
        }
    }
}
