use std::path::PathBuf;

use crate::numcore::NumError;

#[derive(Debug, thiserror::Error)]
pub enum TagError {
    #[error("invalid label `{0}`")]
    BadLabel(String),
    #[error("mention [{start}, {end}) outside sentence of length {len}")]
    MentionOutOfRange { start: usize, end: usize, len: usize },
    #[error("overlapping mention at position {at}")]
    Overlap { at: usize },
    #[error("word {index} has zero length")]
    EmptyWord { index: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {msg}")]
    Malformed { path: String, line: usize, msg: String },
    #[error("{path}:{line}: invalid BIO sequence at character {position}")]
    InvalidBio { path: String, line: usize, position: usize },
    #[error("{path}:{line}: segmentation labels must start with B")]
    InvalidSegmentation { path: String, line: usize },
    #[error("sentence must contain at least one character and no line separators")]
    BadSentence,
    #[error("label count {labels} does not match {chars} characters")]
    LengthMismatch { chars: usize, labels: usize },
    #[error("embedding dimension mismatch: file has {found}, expected {expected}")]
    EmbeddingDim { expected: usize, found: usize },
    #[error("dataset of {size} samples ({real} real) cannot be split with ratio {ratio}")]
    TooSmall { size: usize, real: usize, ratio: f64 },
    #[error("ratio {0} must lie in (0, 1)")]
    BadRatio(f64),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("no inventory entries for entity type `{0}`")]
    EmptyInventory(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("label index {index} out of range for {labels} labels")]
    LabelOutOfRange { index: usize, labels: usize },
    #[error("non-finite update for parameter `{0}`")]
    NonFiniteUpdate(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
