use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad shape: {0}")]
    BadShape(String),

    #[error("regularity violation: edge {edge} has length {length:e}")]
    RegularityViolation { edge: usize, length: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("metric tensor is numerically singular: {0}")]
    SingularMetric(String),

    #[error("edge collapse: edge {edge} shrank to {length:e}")]
    EdgeCollapse { edge: usize, length: f64 },

    #[error("geodesic left the regular domain at t = {t}: edge {edge} has length {length:e}")]
    GeodesicExit { t: f64, edge: usize, length: f64 },

    #[error("geodesic step too large: relative energy drift {drift:e}")]
    StepTooLarge { drift: f64 },

    #[error("point ({x}, {y}) is outside the normalized triangle domain")]
    DomainViolation { x: f64, y: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
