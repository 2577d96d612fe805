use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} out of range: model provides densities for levels 0..{available}")]
    LevelOutOfRange { level: usize, available: usize },

    #[error("level {requested} exceeds the resolution cap {cap}")]
    LevelCapExceeded { requested: usize, cap: usize },

    #[error("non-finite log-density at level {level}")]
    NonFiniteLogDensity { level: usize },

    #[error("all resampling weights vanished at level {level}")]
    DegenerateWeights { level: usize },

    #[error("invalid allocation plan: {0}")]
    InvalidPlan(String),

    #[error("invalid rate parameters: {0}")]
    InvalidRates(String),

    #[error("tridiagonal solve hit a non-positive pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
