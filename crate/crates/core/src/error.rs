use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("input must be a positive integer")]
    ZeroInput,

    #[error("family parameters out of range: need m >= 1 and k >= 3, got m = {m}, k = {k}")]
    FamilyBounds { m: u64, k: u64 },

    #[error("step {step} references an index that is not strictly earlier")]
    BadIndex { step: usize },

    #[error("step {step} does not strictly increase the chain")]
    NonMonotonic { step: usize },

    #[error("value at step {step} does not fit in 64 bits")]
    Overflow { step: usize },

    #[error("chain ends at {actual}, expected {expected}")]
    WrongTarget { expected: String, actual: String },

    #[error("2^{exponent}-1 is not an element of the chain")]
    ContainmentMissing { exponent: u64 },

    #[error("expected the chain to end at 2^{expected}-1, it ends at 2^{actual}-1")]
    ExponentMismatch { expected: u64, actual: u64 },

    #[error("sum construction needs A > B, got A = {a}, B = {b}")]
    SumOrder { a: u64, b: u64 },

    #[error("oracle limit {limit} exceeds the supported maximum {max}")]
    LimitTooLarge { limit: u64, max: u64 },

    #[error("search budget of {budget} node expansions exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("no chain of length <= {max_len} for {target} contains {must_contain}")]
    NoChain {
        target: u64,
        must_contain: u64,
        max_len: u64,
    },

    #[error("construction invariant violated: {0}")]
    Construction(String),

    #[error("certificate rejected: {0}")]
    Certificate(String),
}
