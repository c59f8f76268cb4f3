use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("clip too short: {samples} samples, need at least {needed} for one frame")]
    TooShort { samples: usize, needed: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("state {state} out of range for {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },

    #[error("unsupported model order {0}")]
    UnsupportedOrder(usize),

    #[error("degenerate segment: {0}")]
    DegenerateSegment(String),

    #[error("incomplete bank: {0}")]
    IncompleteBank(String),

    #[error("incompatible features: bank expects '{expected}', input is '{actual}'")]
    IncompatibleFeatures { expected: String, actual: String },

    #[error("undefined t statistic: pooled SD is zero but means differ")]
    UndefinedT,

    #[error("duplicate utterance key (speaker={speaker}, text={text}, emotion={emotion}, replicate={replicate})")]
    DuplicateKey {
        speaker: String,
        text: String,
        emotion: String,
        replicate: u32,
    },

    #[error("missing audio file {0}")]
    MissingAudio(PathBuf),

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
