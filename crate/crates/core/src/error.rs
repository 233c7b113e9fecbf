use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("direction {index} is not unit norm (norm {norm})")]
    NonUnitDirection { index: usize, norm: f64 },
    #[error("iteration limit reached in {0}")]
    IterationLimit(&'static str),
    #[error("t must be positive, got {0}")]
    NonPositiveT(f64),
    #[error("start point is not interior to the body")]
    StartNotInterior,
    #[error("degenerate chord of length {0:e}")]
    ChordDegenerate(f64),
    #[error("sampled point lies outside the reference body")]
    ContainmentViolated,
    #[error("eta must be positive for this formula")]
    EtaZero,
    #[error("root not bracketed on [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },
    #[error("eta = {0} exceeds 1/2")]
    EtaTooLarge(f64),
    #[error("point is not in the body")]
    NotInBody,
    #[error("shift h = {h} is outside the admissible range for eta = {eta}")]
    HOutOfRange { eta: f64, h: f64 },
    #[error("origin is not an interior point")]
    OriginNotInterior,
    #[error("dimension {0} exceeds the enumeration limit")]
    DimensionTooLarge(usize),
    #[error("center is not interior to the polytope")]
    CenterNotInterior,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("conic solver failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
