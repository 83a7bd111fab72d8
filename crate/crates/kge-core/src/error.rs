//! Error type shared across the crate.

use std::path::PathBuf;

use crate::data::Triple;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: expected 3 tab-separated fields, found {found}")]
    MalformedLine {
        file: String,
        line: usize,
        found: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("entity id {id} out of bounds for {count} entities")]
    EntityOutOfBounds { id: usize, count: usize },

    #[error("relation id {id} out of bounds for {count} relations")]
    RelationOutOfBounds { id: usize, count: usize },

    #[error("odd size {width} for complex geometry; {kind} needs an even embedding size")]
    OddComplexWidth { kind: String, width: usize },

    #[error("embedding table must have at least one row and one column (got {rows}x{width})")]
    EmptyTable { rows: usize, width: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("cannot corrupt triples with fewer than 2 entities (got {0})")]
    TooFewEntities(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite score for triple ({h},{r},{t}){}", epoch.map(|e| format!(" at epoch {e}")).unwrap_or_default())]
    NonFiniteScore {
        h: usize,
        r: usize,
        t: usize,
        epoch: Option<usize>,
    },

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("loss kind {loss} does not apply to model kind {kind}")]
    LossKindMismatch { loss: String, kind: String },

    #[error("replica {index} failed: {source}")]
    ReplicaFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint was trained on a different vocabulary (checkpoint hash {expected}, dataset hash {got})")]
    VocabularyMismatch { expected: String, got: String },

    #[error("no reports to aggregate")]
    EmptyAggregate,

    #[error("no ranks to summarize")]
    EmptyRanks,
}

impl Error {
    pub(crate) fn non_finite(triple: Triple, epoch: Option<usize>) -> Self {
        Error::NonFiniteScore {
            h: triple.head,
            r: triple.relation,
            t: triple.tail,
            epoch,
        }
    }
}
