use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("invalid record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated file: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("non-finite value in row {row} (`{id}`)")]
    NonFinite { row: usize, id: String },

    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),

    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,

    #[error("k must be at least 1")]
    InvalidK,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("embedding dimension must be at least {min}, got {actual}")]
    InvalidDim { min: usize, actual: usize },

    #[error("required id `{0}` is not in the corpus")]
    MissingRequiredId(String),

    #[error("{required} required passages exceed sample size {sample_size}")]
    RequiredExceedsSample { required: usize, sample_size: usize },

    #[error("query `{0}` has no context label")]
    MissingLabel(String),

    #[error("no hard negative for query `{query}` within {searched} candidates")]
    NoNegativeFound { query: String, searched: usize },

    #[error("query `{query}` uses protocol {actual}, expected {expected}")]
    WrongProtocol {
        query: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid bin edges: {0}")]
    InvalidEdges(String),

    #[error("overlap score {score} for `{id}` is outside [0, 100]")]
    ScoreOutOfRange { id: String, score: f64 },

    #[error("cannot sample {requested} of {available} queries")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("unknown document `{0}`")]
    UnknownDocument(String),

    #[error("index and corpus disagree: {0}")]
    CorpusMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
