use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("judgment file contains no data rows")]
    EmptyInput,

    #[error("empty pool for system {0}")]
    EmptyPool(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("combined pool size {0} exceeds the exact enumeration bound of {1}")]
    EnumerationBound(usize, usize),

    #[error("annotator noise unidentifiable: no segment has repeat judgments")]
    NoRepeatJudgments,

    #[error("segment identifiers are required for this operation")]
    MissingSegments,

    #[error("total variance is zero")]
    ZeroVariance,

    #[error("infinite efficiency: noiseless perfect metric")]
    InfiniteEfficiency,

    #[error("MDE unattainable within cap of {0} judgments")]
    Unattainable(usize),

    #[error("corpus never reaches target rate {0}")]
    TargetRateNotReached(f64),

    #[error("pool sizes ({n_a}, {n_b}) do not match the plan schedule at peek {peek} (expected ({expected_a}, {expected_b}))")]
    ScheduleMismatch {
        peek: usize,
        n_a: usize,
        n_b: usize,
        expected_a: usize,
        expected_b: usize,
    },

    #[error("judgment source exhausted for system {0}")]
    SourceExhausted(&'static str),

    #[error("curves do not cross power level {0}")]
    NoCrossing(f64),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
