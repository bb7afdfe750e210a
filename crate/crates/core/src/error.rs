use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("simplex {index} has a degenerate reference shape (volume {volume:e})")]
    DegenerateElement { index: usize, volume: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("constraint {origin} conflicts with the preceding constraints")]
    InconsistentConstraint { origin: String },

    #[error("vertex {0} has an open one-ring (boundary vertex)")]
    OpenOneRing(usize),

    #[error("vertex {0} has a degenerate one-ring")]
    DegenerateOneRing(usize),

    #[error("objective is not finite at the starting point; relax {0}")]
    InfeasibleStart(&'static str),

    #[error("input has {0} inverted elements; run untangle first")]
    Tangled(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state has {0} inverted elements")]
    InvertedElements(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
