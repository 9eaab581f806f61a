use thiserror::Error;

pub type Result<T> = std::result::Result<T, TtError>;

#[derive(Debug, Error)]
pub enum TtError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index:?} out of bounds for modes {modes:?}")]
    IndexOutOfBounds { index: Vec<usize>, modes: Vec<usize> },

    #[error("flattening position {mu} out of range 1..={max}")]
    ModeOutOfRange { mu: usize, max: usize },

    #[error("dense materialization of {elements} elements exceeds cap {cap} (set TT_DESK_CAP to override)")]
    DenseCapExceeded { elements: usize, cap: usize },

    #[error("operation undefined for the zero tensor")]
    ZeroTensor,

    #[error("infeasible ranks {ranks:?} for modes {modes:?}")]
    InfeasibleRanks { ranks: Vec<usize>, modes: Vec<usize> },

    #[error("rank deficiency at core {core}: singular value ratio {ratio:e}")]
    RankDeficient { core: usize, ratio: f64 },

    #[error("gauge condition violated at core {core}: {violation:e} exceeds tolerance {tolerance:e}")]
    GaugeViolation { core: usize, violation: f64, tolerance: f64 },

    #[error("tangent vectors live at different base points")]
    MismatchedBase,

    #[error("eigen-iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
