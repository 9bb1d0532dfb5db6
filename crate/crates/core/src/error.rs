use thiserror::Error;

/// Errors produced anywhere in the identification toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient self-reports: need at least {needed}, found {found}")]
    InsufficientReports { needed: usize, found: usize },

    #[error("no self-report at k=0 to seed the rollout")]
    MissingInitialReport,

    #[error("degenerate distribution: sample standard deviation is zero")]
    DegenerateDistribution,

    #[error("insufficient qualifying fits: need at least {needed}, found {found}")]
    InsufficientFits { needed: usize, found: usize },

    #[error("grid of {0} points exceeds the exhaustive-search limit")]
    GridTooLarge(u64),

    #[error("empty record list")]
    EmptyRecords,

    #[error("record {index}: unpaired {kind} event")]
    UnpairedEvent { index: usize, kind: String },

    #[error("record {index}: overlapping {kind} interval")]
    OverlappingInterval { index: usize, kind: String },

    #[error("record {index}: timestamp {t} precedes the previous record")]
    OutOfOrder { index: usize, t: f64 },

    #[error("record {index}: self-report collides with another at k={k}")]
    ReportCollision { index: usize, k: usize },

    #[error("parse error at line {line}, field `{field}`: {msg}")]
    Parse {
        line: usize,
        field: String,
        msg: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
