use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    // framing
    #[error("no synchronization pulse found")]
    NoSyncFound,
    #[error("trace too short: {requested} symbol windows requested, {available} available")]
    TruncatedTrace { requested: usize, available: usize },
    #[error("cannot split {samples} samples into {bins} bins")]
    InsufficientSamples { samples: usize, bins: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("unknown record id {0}")]
    UnknownRecord(u64),
    #[error("unknown architecture {0:?}")]
    UnknownArchitecture(String),

    // persisted formats
    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: String, expected: String },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: {0}")]
    Truncated(String),
    #[error("invalid record: {0}")]
    Validation(String),
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("model descriptor: {0}")]
    Descriptor(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad files or arguments rather than by data
    /// that fails a contract. The CLI maps the two classes to distinct exit codes.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::UnknownArchitecture(_)
                | Error::UnknownRecord(_)
                | Error::UnsupportedVersion { .. }
                | Error::MalformedHeader(_)
                | Error::Truncated(_)
                | Error::Checksum { .. }
                | Error::Descriptor(_)
                | Error::Io { .. }
        )
    }
}
