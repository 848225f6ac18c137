use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("non-finite input current ({0})")]
    NonFiniteCurrent(f64),

    #[error("membrane potential became non-finite (u={u}, input={current})")]
    NonFinitePotential { u: f64, current: f64 },

    #[error("truncated record at byte offset {offset} ({len} bytes total)")]
    TruncatedRecord { offset: usize, len: usize },

    #[error("event #{index} out of range: x={x}, y={y} (sensor {width}x{height})")]
    EventOutOfRange {
        index: usize,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },

    #[error("event #{index} cannot be encoded: {reason}")]
    Unencodable { index: usize, reason: String },

    #[error("missing AEDAT 3.1 magic header")]
    MissingHeader,

    #[error("malformed AEDAT packet at byte {offset}: {reason}")]
    MalformedPacket { offset: usize, reason: String },

    #[error("class {0} not present in label spans")]
    ClassAbsent(u32),

    #[error("class {0} is excluded (\"Other\" gestures are not used)")]
    ExcludedClass(u32),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    #[error("classifier: {0}")]
    Classifier(String),

    #[error("config: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(context: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            reason: reason.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParam { .. } | Error::Config(_) => ErrorKind::Config,
            Error::TruncatedRecord { .. }
            | Error::EventOutOfRange { .. }
            | Error::Unencodable { .. }
            | Error::MissingHeader
            | Error::MalformedPacket { .. }
            | Error::ClassAbsent(_)
            | Error::ExcludedClass(_)
            | Error::Parse { .. }
            | Error::Dataset(_)
            | Error::Checkpoint(_)
            | Error::Io { .. } => ErrorKind::Data,
            Error::NonFiniteCurrent(_)
            | Error::NonFinitePotential { .. }
            | Error::Dimension(_)
            | Error::Classifier(_) => ErrorKind::Runtime,
        }
    }
}
