use thiserror::Error;

/// Errors surfaced by the covariance kernels, model recursions, fitting,
/// filtering and evaluation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degrees of freedom must exceed 2, got {0}")]
    InvalidDof(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty particle cloud or point set")]
    EmptyCloud,

    #[error("degenerate weights: all weights are zero or non-finite")]
    DegenerateWeights,

    #[error("too few observations: need at least {required}, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("rejection sampling budget exceeded after {0} draws")]
    RejectionBudgetExceeded(usize),

    #[error("no feasible starting point found for the optimizer")]
    NoFeasibleStart,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty evaluation run")]
    EmptyRun,

    #[error("degenerate score table: {0}")]
    DegenerateTable(String),

    #[error("unsupported number of methods for Nemenyi test: {0} (supported: 2..=10)")]
    UnsupportedK(usize),

    #[error("unsupported alpha for Nemenyi test: {0} (supported: 0.05, 0.10)")]
    UnsupportedAlpha(f64),

    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),

    #[error("non-positive price at row {0}; log returns need positive prices")]
    NonPositivePrice(usize),

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("file has a header but no data rows: {0}")]
    EmptyFile(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("too many failed prediction steps: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-parsable category used on the CLI's stderr line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidDof(_) => "InvalidDof",
            Error::InvalidParams(_) => "InvalidParams",
            Error::EmptyCloud => "EmptyCloud",
            Error::DegenerateWeights => "DegenerateWeights",
            Error::TooFewObservations { .. } => "TooFewObservations",
            Error::RejectionBudgetExceeded(_) => "RejectionBudgetExceeded",
            Error::NoFeasibleStart => "NoFeasibleStart",
            Error::NonFinite(_) => "NonFinite",
            Error::EmptyRun => "EmptyRun",
            Error::DegenerateTable(_) => "DegenerateTable",
            Error::UnsupportedK(_) => "UnsupportedK",
            Error::UnsupportedAlpha(_) => "UnsupportedAlpha",
            Error::ZeroVarianceColumn(_) => "ZeroVarianceColumn",
            Error::NonPositivePrice(_) => "NonPositivePrice",
            Error::FileNotFound(_) => "FileNotFound",
            Error::EmptyFile(_) => "EmptyFile",
            Error::HeaderMismatch(_) => "HeaderMismatch",
            Error::TooManyFailures { .. } => "TooManyFailures",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
