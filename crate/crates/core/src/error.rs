use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("block length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("cannot combine an empty list of blocks")]
    EmptyCombine,

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("demand vector does not cover file {file}")]
    Coverage { file: u32 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("no qualifying swap for file {file} at database {db}, k = {k}")]
    InfeasibleSwap { db: usize, k: usize, file: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("decode plan cannot be executed: {0}")]
    UnresolvablePlan(String),

    #[error("peeling decode disagrees with the GF(2) solver: {0}")]
    OracleMismatch(String),

    #[error("instance too large for exhaustive enumeration ({assignments} assignments, limit {limit})")]
    TooLarge { assignments: String, limit: u64 },

    #[error("cache size {0} is outside [0, N]")]
    MemoryOutOfRange(String),

    #[error("line {line}: field `{field}`: {message}")]
    Config {
        line: usize,
        field: String,
        message: String,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}
