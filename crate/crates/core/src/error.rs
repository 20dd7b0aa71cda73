use thiserror::Error;

use crate::graph::Edge;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("edge ({}, {}) is not in the graph", .0.0, .0.1)]
    EdgeNotInGraph(Edge),

    #[error("no weight given for edge ({}, {})", .0.0, .0.1)]
    MissingWeight(Edge),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("no connected sample after {attempts} attempts")]
    ResamplingExhausted { attempts: usize },

    #[error("n = {0} exceeds the brute-force enumeration limit")]
    TooLarge(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
