use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("tensor `{tensor}`: expected {expected} bytes, found {found}")]
    ShapeMismatch {
        tensor: String,
        expected: usize,
        found: usize,
    },

    #[error("tensor `{tensor}` has a non-finite value at index {index}")]
    NonFiniteWeight { tensor: String, index: usize },

    #[error("sequence of length {len} exceeds capacity {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target position {target} out of range for sequence of length {len}")]
    TargetOutOfRange { target: usize, len: usize },

    #[error("tokenization covers {tokenized} bytes but text has {text}")]
    TokenizationMismatch { tokenized: usize, text: usize },

    #[error("fragment {fragment} has no tokens inside the relevance coverage")]
    UncoveredFragment { fragment: usize },

    #[error("node {0} is not an answer fragment")]
    NotAnswerNode(usize),

    #[error("unknown export format `{0}`")]
    UnknownFormat(String),

    #[error("scorer unreachable for unit {unit}: {reason}")]
    ScorerUnreachable { unit: usize, reason: String },

    #[error("malformed scorer reply for unit {unit}: {reason}")]
    MalformedReply { unit: usize, reason: String },

    #[error("empty fragment label list")]
    EmptyLabels,

    #[error("sample id mismatch: {0}")]
    IdMismatch(String),

    #[error("dataset line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("degenerate perturbation: {0}")]
    DegenerateCurve(String),

    #[error("need at least {needed} random curves, got {got}")]
    InsufficientCurves { needed: usize, got: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
