use thiserror::Error;

/// Errors produced by the recommendation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty ratings input")]
    EmptyInput,
    #[error("line {line}: malformed rating record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadTestFraction(f64),
    #[error("unknown user id {0}")]
    UnknownUser(u64),
    #[error("cold user {0}: no training ratings")]
    ColdUser(u64),
    #[error("diversity undefined for lists with fewer than 2 items")]
    DiversityUndefined,
    #[error("empty frontier")]
    EmptyFrontier,
    #[error("empty initial archive")]
    EmptyInitialArchive,
    #[error("TOPSIS undefined for a single alternative")]
    TopsisSingleRow,
    #[error("TOPSIS criterion column {0} is all zeros")]
    TopsisZeroColumn(usize),
    #[error("invalid recommendation list: {0}")]
    InvalidList(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
