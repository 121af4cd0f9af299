use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid metric: {0}")]
    Metric(String),

    #[error("time {time} is not a grid time at resolution {steps}")]
    OffGrid { time: f64, steps: usize },

    #[error("invalid space spec: {0}")]
    Spec(String),

    #[error("instance of size {size} exceeds cap {cap}")]
    Size { size: usize, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("restriction keeps no mass")]
    EmptyRestriction,

    #[error("no {steps}-step geodesic from {from} to {to}")]
    NoGeodesic {
        from: String,
        to: String,
        steps: usize,
    },

    #[error("sequence is not a constant-speed geodesic: {0}")]
    NotGeodesic(String),

    #[error("single-branch normalization failed: {0}")]
    Normalization(String),

    #[error("mix failed at anchor {anchor}: left {left:?} + right {right:?} is not a geodesic")]
    Mix {
        anchor: String,
        left: Vec<String>,
        right: Vec<String>,
    },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
