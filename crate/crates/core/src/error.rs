use thiserror::Error;

#[derive(Debug, Error)]
pub enum CtlabError {
    #[error("invalid SCM: {0}")]
    InvalidScm(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("zero probability mass: {0}")]
    ZeroMass(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CtlabError>;
