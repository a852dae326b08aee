use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },

    #[error("too few distinct values: needed {needed} bins, got {got} distinct edges")]
    TooFewDistinctValues { needed: usize, got: usize },

    #[error("empty bin {bin} in the tested treatment")]
    EmptyBin { bin: usize },

    #[error("bin {bin} has {count} samples, below the minimum of {min}")]
    BinUnderflow { bin: usize, count: usize, min: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("null-proxy assumption violated for the requested target")]
    AssumptionViolation,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::UnknownScenario(_) => "unknown-scenario",
            Error::InvalidModel(_) => "invalid-model",
            Error::UnknownVariable(_) => "unknown-variable",
            Error::InvalidDataset(_) => "invalid-dataset",
            Error::NonFinite { .. } => "non-finite",
            Error::TooFewDistinctValues { .. } => "too-few-distinct-values",
            Error::EmptyBin { .. } => "empty-bin",
            Error::BinUnderflow { .. } => "bin-underflow",
            Error::Precondition(_) => "precondition",
            Error::AssumptionViolation => "assumption-violation",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::Singular(_) => "singular-system",
            Error::Degenerate(_) => "degenerate",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
