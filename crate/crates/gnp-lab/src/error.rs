use thiserror::Error;

/// Errors produced by parameter validation, graph input and config loading.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probability must be in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("vertex count must be >= 1, got {0}")]
    InvalidVertexCount(u64),
    #[error("epsilon must be in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("walk needs m >= 1, got {0}")]
    InvalidWalkTrials(u64),
    #[error("edge ({0}, {1}) has an endpoint outside 1..={2}")]
    EndpointOutOfRange(u64, u64, u64),
    #[error("self-loop at vertex {0}")]
    SelfLoop(u64),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(u64, u64),
    #[error("order is not a permutation of 1..={0}")]
    NotAPermutation(u64),
    #[error("exhaustive enumeration limited to n <= {limit}, got n = {n}")]
    EnumerationTooLarge { n: u64, limit: u64 },
    #[error("sequence must sum to -1, got {0}")]
    SequenceSum(i64),
    #[error("empty sequence")]
    EmptySequence,
    #[error("step grid must lie in [{lo}, {hi}], got t = {t}")]
    GridOutOfRange { t: u64, lo: u64, hi: u64 },
    #[error("bad edge list input: {0}")]
    EdgeListFormat(String),
    #[error("config field `{field}`: {message}")]
    ConfigField { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
