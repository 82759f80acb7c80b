use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot duplicate on empty graph")]
    EmptyGraph,

    #[error("graph too small: {0}")]
    GraphTooSmall(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    Singular { pivot: f64, column: usize },

    #[error("fundamental matrix is ill-conditioned (cond_1 = {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("N0 too small for generator: B[{row}][{col}] = {value:e} is negative")]
    NotStochastic { row: usize, col: usize, value: f64 },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("generator is not irreducible")]
    NotIrreducible,

    #[error("stationary residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::InvalidParameter(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
