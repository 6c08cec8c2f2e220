use thiserror::Error;

/// Errors raised across the solvers and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("negative density {value} at node {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("CFL sub-cycling exceeded {limit} substeps (needed {needed})")]
    CflExceeded { needed: usize, limit: usize },

    #[error("search radius too small: maximizer for node {node} hit the window edge at row {row}")]
    SearchRadius { node: usize, row: usize },

    #[error("no argmax record for node {node} at row {row}")]
    MissingArgmax { node: usize, row: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("obstacle schemes disagree: max gap {gap:.3e} exceeds {tolerance:.3e}")]
    ObstacleDisagreement { gap: f64, tolerance: f64 },

    #[error("monotonicity violated: gap {gap:.3e} exceeds {tolerance:.3e} ({what})")]
    Monotonicity { what: String, gap: f64, tolerance: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
