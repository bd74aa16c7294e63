use thiserror::Error;

/// Errors shared across the crate.
///
/// Domain violations are reported loudly instead of being coerced to a
/// default value; callers that want to probe (for example membership tests)
/// get a `bool`, not an error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero matrix has no content")]
    ZeroMatrix,
    #[error("matrix is not in GL2+(Q): determinant must be positive")]
    NonPositiveDeterminant,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("malformed matrix {input:?}: expected \"a,b;c,d\" with rational entries")]
    MalformedMatrix { input: String },
    #[error("level insufficient: level {level} cannot decide divisibility by {modulus}")]
    LevelInsufficient { level: String, modulus: String },
    #[error("level must be positive, got {0}")]
    InvalidLevel(u64),
    #[error("argument must be positive")]
    NotPositive,
    #[error("radius must be at least 1")]
    EmptyRadius,
    #[error("value too large to factor: {0}")]
    FactorOverflow(String),
    #[error("determinant too large for graph export")]
    ExportOverflow,
    #[error("{divisor} is not an exact divisor of {n}")]
    NotExactDivisor { n: u64, divisor: u64 },
    #[error("{divisor} does not divide {n}")]
    NotDivisor { n: u64, divisor: u64 },
    #[error("orbit exceeds cap {cap}")]
    OrbitExceedsCap { cap: usize },
    #[error("divergent range: partition function requires beta > 2, got {0}")]
    DivergentRange(f64),
    #[error("truncation underflow: result would retain no terms")]
    TruncationUnderflow,
    #[error("insufficient truncation: need coefficients through order {needed}, have {have}")]
    InsufficientTruncation { needed: i64, have: i64 },
    #[error("not replicable at {k}: consistency fails at coefficient {m}")]
    NotReplicable { k: u32, m: i64 },
    #[error("replicate family is missing member {0}")]
    IncompleteFamily(u32),
    #[error("series is not in normalized principal form: {0}")]
    NotNormalizedPrincipal(String),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("evaluation requires Im(z) > 0")]
    NotInUpperHalfPlane,
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
