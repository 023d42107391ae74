use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the rod solver and its I/O layer.
#[derive(Debug, Error)]
pub enum RodError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("corrupted state: degenerate nodal vector at node {node} ({what})")]
    CorruptedState { node: usize, what: &'static str },

    #[error("singular saddle-point system in {stage} (pivot {pivot} at row {row})")]
    SingularSystem { stage: String, row: usize, pivot: f64 },

    #[error("non-finite energy contribution at element pair ({0}, {1})")]
    NonFiniteContribution(usize, usize),

    #[error("non-finite energy at step {step}")]
    NonFiniteEnergy { step: usize },

    #[error("curve is not closed; this operation needs a periodic mesh")]
    NotClosed,

    #[error("curves are not disjoint (distance {0:e})")]
    NotDisjoint(f64),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown energy term `{0}`")]
    UnknownTerm(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = RodError> = std::result::Result<T, E>;

impl RodError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        RodError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RodError::Io {
            path: path.into(),
            source,
        }
    }
}
