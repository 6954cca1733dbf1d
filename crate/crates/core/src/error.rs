use std::path::PathBuf;

/// Errors produced by the ranking pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDoc(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("document {0:?} has no sentences")]
    EmptyDocument(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no positives")]
    NoPositives,

    #[error("replay memory is empty")]
    EmptyMemory,

    #[error("reward transition: every logged slate was skipped")]
    NoRewardTerms,

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("document {0:?} is not in the current slate")]
    StaleFeedback(String),

    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
