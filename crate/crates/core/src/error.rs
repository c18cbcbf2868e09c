use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid part: {0}")]
    InvalidPart(String),

    #[error("field `{name}` has {got} values, expected {expected}")]
    LengthMismatch { name: String, got: usize, expected: usize },

    #[error("non-finite value in field `{0}`")]
    NonFinite(String),

    /// Mixture density at or below the vacuum floor; carries the offending node indices.
    #[error("density floor violated at {} node(s)", nodes.len())]
    FloorViolation { nodes: Vec<usize> },

    #[error("missing time data: {0}")]
    MissingTimeData(String),

    #[error("missing field: {0}")]
    MissingField(String),

    #[error("malformed analytic spec: {0}")]
    MalformedSpec(String),

    #[error("CFL violated: dt = {dt:e} exceeds limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
