use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::Quarter;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate article id `{0}`")]
    DuplicateArticle(String),

    #[error("ticker `{ticker}` is claimed by both `{first}` and `{second}`")]
    TickerConflict {
        ticker: String,
        first: String,
        second: String,
    },

    #[error("name literal `{literal}` maps to both `{first}` and `{second}`")]
    PatternCollision {
        literal: String,
        first: String,
        second: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown company `{0}`")]
    UnknownCompany(String),

    #[error("{quarter} {polarity}: {message}")]
    Numerical {
        quarter: Quarter,
        polarity: String,
        message: String,
    },

    #[error("missing artifact {path}; run `newsrisk {command}` first")]
    MissingArtifact {
        path: PathBuf,
        command: &'static str,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("regex: {0}")]
    Regex(#[from] regex::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status: 1 for validation failures, 2 for a missing
    /// upstream stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingArtifact { .. } => 2,
            _ => 1,
        }
    }
}
