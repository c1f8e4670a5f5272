use thiserror::Error;

use crate::device::Edge;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("parameter vector has length {got}, circuit expects {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("invalid device: {0}")]
    Device(String),

    #[error("{0}")]
    Mapping(String),

    #[error("circuit has {0} qubits; the statevector engine supports at most {max}", max = crate::simulator::MAX_QUBITS)]
    TooManyQubits(usize),

    #[error("fit quality: {0}")]
    FitQuality(String),

    #[error("fit failed for {edge}{}: {source}", .paired.map(|p| format!(" paired with {p}")).unwrap_or_default())]
    PairFit {
        edge: Edge,
        paired: Option<Edge>,
        #[source]
        source: Box<Error>,
    },

    #[error("layer of {size} gates exceeds the exact solver bound of {max}; use the greedy fallback")]
    ScheduleTooLarge { size: usize, max: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("non-finite cost at iteration {0}")]
    NonFinite(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
