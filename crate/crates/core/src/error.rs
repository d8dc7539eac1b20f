use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is not supported by this operation")]
    UnsupportedModulus(u64),
    #[error("zero has no multiplicative order")]
    ZeroElement,
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported matrix dimension {0} (expected 2 or 4)")]
    UnsupportedDimension(usize),
    #[error("matrix is not invertible")]
    Singular,
    #[error("group closure exceeded the cap of {cap} elements")]
    ClosureOverflow { cap: usize },
    #[error("group of order {size} exceeds the enumeration bound {bound}")]
    BoundExceeded { size: usize, bound: usize },
    #[error("unknown group kind `{0}`")]
    UnknownKind(String),
    #[error("embedding error: {0}")]
    Embedding(String),
    #[error("{ell} ramifies in the coefficient ring (double root of the minimal polynomial)")]
    Ramified { ell: u64 },
    #[error("denominator {den} is divisible by {ell}")]
    DenominatorDivisible { den: i64, ell: u64 },
    #[error("{label}: no coefficient a_{p} in the record")]
    MissingCoefficient { label: String, p: u64 },
    #[error("prime {p} divides {what}")]
    BadPrime { p: u64, what: u64 },
    #[error("{label}: data covers primes up to {have}, {needed} required")]
    DataCoverage { label: String, needed: u64, have: u64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid newform label `{0}`")]
    InvalidLabel(String),
    #[error("newform `{0}` not found")]
    NotFound(String),
    #[error("{label}: upstream provides coefficients up to {achieved}, {requested} requested")]
    PartialData { label: String, achieved: u64, requested: u64 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {msg} (payload starts: {excerpt})")]
    Parse { msg: String, excerpt: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
