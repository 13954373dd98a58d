use thiserror::Error;

use crate::lattice::ApproxConfig;
use crate::metrics::CategoryId;

pub type Result<T> = std::result::Result<T, DsaError>;

/// Errors surfaced by the library.
///
/// Variants fall into two families that callers (the CLI in particular)
/// treat differently: input validation failures and degenerate metric
/// conditions. See [`DsaError::is_degenerate`].
#[derive(Debug, Error)]
pub enum DsaError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value for {axis}: {value}")]
    NonFinite { axis: &'static str, value: f64 },

    #[error("config {0} is not a member of the grid")]
    OffGrid(ApproxConfig),

    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("video {video} frame {frame}: {message}")]
    InvalidFrame { video: String, frame: u32, message: String },

    #[error("video {video}: expected frame {expected}, found frame {found}")]
    NonContiguous { video: String, expected: u32, found: u32 },

    #[error("video {video} frame {frame} is sparse; oracle operations need dense records")]
    SparseFrame { video: String, frame: u32 },

    #[error("cost model {detector}: {message}")]
    InvalidCostModel { detector: String, message: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid emulator parameters: {0}")]
    InvalidParams(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no frames contain category {0}")]
    NoFrames(CategoryId),

    #[error("baseline mAP is zero for {0}; normalized values are undefined")]
    DegenerateBaseline(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no training frame produced a feature vector above the confidence gate")]
    NoTrainingSamples,

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DsaError {
    /// True for conditions where the inputs were valid but a metric could
    /// not be defined (zero baseline mAP, category absent).
    pub fn is_degenerate(&self) -> bool {
        matches!(self, DsaError::NoFrames(_) | DsaError::DegenerateBaseline(_))
    }
}
