use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("item index {index} does not fit in {bits} bits")]
    IndexOutOfRange { index: u64, bits: u32 },
    #[error("invalid bit length {0}, expected 1..=64")]
    InvalidLength(u32),
    #[error("prefix length {requested} exceeds code length {available}")]
    PrefixTooLong { requested: u32, available: u32 },
    #[error("candidate domain needs at least one parent prefix")]
    EmptyParents,
    #[error("level length {current} must exceed previous length {previous}")]
    NonIncreasingLength { current: u32, previous: u32 },
    #[error("parent prefix has length {found}, expected {expected}")]
    MismatchedParentLength { expected: u32, found: u32 },
    #[error("candidate domain of {0} prefixes is too large")]
    DomainTooLarge(u128),
    #[error("level {level} outside 1..={granularity}")]
    LevelOutOfRange { level: u32, granularity: u32 },
    #[error("domain index {index} outside domain of size {size}")]
    DomainIndex { index: usize, size: usize },
    #[error("cannot aggregate an empty report list")]
    NoReports,
    #[error("report kind does not match the oracle configuration")]
    MixedReports,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("party {0} has no users")]
    EmptyParty(u32),
    #[error("failed to allocate a non-empty item domain for party {0} after 10 attempts")]
    EmptyAllocation(u32),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }
}
