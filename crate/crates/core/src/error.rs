use num_bigint::BigUint;
use num_rational::BigRational;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("base must be at least 2, got {0}")]
    InvalidBase(u32),

    #[error("digit {digit} out of range for base {base}")]
    InvalidDigit { digit: u32, base: u32 },

    #[error("empty digit string")]
    EmptyDigits,

    #[error("base {0} cannot be rendered as text (maximum 36)")]
    BaseTooLargeForText(u32),

    #[error("stream is not strictly increasing: {next} follows {prev}")]
    OrderViolation { prev: String, next: String },

    #[error("polynomial value is negative at n = {n}")]
    NegativeValue { n: BigUint },

    #[error("floor undecided at maximum precision: value in [{lo}, {hi}]")]
    AmbiguousFloor { lo: Box<BigRational>, hi: Box<BigRational> },

    #[error("census has no windows")]
    EmptyCensus,

    #[error("block length {got} does not match census block length {expected}")]
    BlockLengthMismatch { expected: usize, got: usize },

    #[error("block space {base}^{len} exceeds the 128-bit block index")]
    BlockSpaceTooLarge { base: u32, len: usize },

    #[error("not enough checkpoints past burn-in: {found} (need 2)")]
    NotEnoughData { found: usize },

    #[error("no witness of length {len} among {tried} candidates")]
    WitnessNotFound { len: u64, tried: u64 },

    #[error("stage {stage} has no witness of length {len} among {tried} candidates")]
    StageFailed { stage: u32, len: u64, tried: u64 },

    #[error("no threshold found up to length {max_len}")]
    ThresholdNotFound { max_len: u64 },

    #[error("construction integrity: {0}")]
    IntegrityError(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
