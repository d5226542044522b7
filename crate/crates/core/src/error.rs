use std::path::PathBuf;

use crate::domain::Preset;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violated a documented precondition or type invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("no trained {kind} model for preset {preset}")]
    MissingModel { kind: &'static str, preset: Preset },

    #[error("search space of {size} assignments exceeds the brute-force guard of {limit}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    /// A table failed strict schema validation. `line` is 1-based and counts the header.
    #[error("{path}: line {line}, column `{column}`: {message}")]
    Schema {
        path: String,
        line: usize,
        column: String,
        message: String,
    },

    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model file checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
