use thiserror::Error;

/// Errors produced by data handling, estimation, and sampling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error("ragged rows: row {row} has {got} fields, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("empty table")]
    EmptyTable,
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` is categorical, expected numeric")]
    NotNumeric(String),
    #[error("categorical column `{0}` has a single level")]
    SingleLevel(String),
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("non-finite value in column `{0}`")]
    NonFinite(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank-deficient design matrix")]
    RankDeficient,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate residuals (zero sum of squares)")]
    DegenerateResiduals,
    #[error("slice collapse: bracket shrank below tolerance without acceptance")]
    SliceCollapse,
    #[error("sampler precondition violated: {0}")]
    Precondition(String),
    #[error("empty chain")]
    EmptyChain,
    #[error("no applicable method for scenario: {0}")]
    NoApplicableMethod(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
