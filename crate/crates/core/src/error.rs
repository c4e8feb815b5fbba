use std::path::PathBuf;

use thiserror::Error;

use crate::annotate::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Shape(String),

    #[error("empty sequence: recurrent layers need at least one timestep")]
    EmptySequence,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("insufficient audio: {samples} samples, need at least {required}")]
    InsufficientAudio { samples: usize, required: usize },

    #[error("unsupported audio in {path}: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("utterance {utterance_id}: missing required {field}")]
    MissingFeature { utterance_id: String, field: String },

    #[error("duplicate utterance id {0}")]
    DuplicateId(String),

    #[error("{corpus}: source label {label:?} is neither mapped nor dropped")]
    UnmappedLabel { corpus: String, label: String },

    #[error("class {0} has zero support")]
    ZeroSupport(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("need at least {needed} items, got {available}")]
    TooFew { needed: usize, available: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("utterance {utterance_id}: {source}")]
    Backend {
        utterance_id: String,
        #[source]
        source: BackendError,
    },

    #[error("annotation failure budget exceeded: {failures} failures (budget {budget})")]
    FailureBudget { failures: usize, budget: usize },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
