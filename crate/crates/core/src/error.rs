use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("universe must contain at least one node")]
    EmptyUniverse,

    #[error("universe of {n} nodes exceeds the supported maximum of {max}")]
    UniverseTooLarge { n: usize, max: usize },

    #[error("node set belongs to a universe of {found} nodes, expected {expected}")]
    UniverseMismatch { expected: usize, found: usize },

    #[error("{}", match node {
        Some(v) => format!("slice of node {v} references index {index}, outside 0..{n}"),
        None => format!("index {index} is outside 0..{n}"),
    })]
    IndexOutOfRange {
        node: Option<usize>,
        index: usize,
        n: usize,
    },

    #[error("slice {slice:?} of node {node} does not contain its owner")]
    OwnerMissing { node: usize, slice: Vec<usize> },

    #[error("expected slice lists for {expected} nodes, found {found}")]
    SliceCountMismatch { expected: usize, found: usize },

    #[error("deleting every node leaves an empty system")]
    DeletedEverything,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u64),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("no input records")]
    EmptyInput,

    #[error("check exceeded its time budget")]
    Timeout,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}
