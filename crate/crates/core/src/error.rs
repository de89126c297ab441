use thiserror::Error;

/// Errors raised while building meshes, assembling or solving.
#[derive(Debug, Error)]
pub enum HelmError {
    #[error("invalid mesh resolution: {0}")]
    InvalidResolution(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),

    #[error("pivot breakdown at row {index}: |pivot| = {magnitude:e}")]
    SmallPivot { index: usize, magnitude: f64 },

    #[error("meshes are not a nested pair: coarse n = {coarse}, fine n = {fine}")]
    NotNested { coarse: usize, fine: usize },

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rate is undefined: {0}")]
    RateUndefined(String),

    #[error("iteration cap of {0} reached without convergence")]
    IterationCap(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HelmError> = std::result::Result<T, E>;
