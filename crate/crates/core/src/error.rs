use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("minor order {k} out of range 1..={max}")]
    MinorOrder { k: usize, max: usize },

    #[error("row index {index} out of range for a matrix with {rows} rows")]
    RowIndex { index: usize, rows: usize },

    #[error("modulus must be greater than 1, got {0}")]
    Modulus(String),

    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("invalid field specification {0:?}: expected \"p^k\" with p prime and k >= 1")]
    FieldSpec(String),

    #[error("field order {q} exceeds the discrete-log table bound {bound}")]
    TableBound { q: u64, bound: u64 },

    #[error("discrete logarithm is undefined at zero")]
    DlogZero,

    #[error("zero has no multiplicative inverse")]
    ZeroInverse,

    #[error("enumerating {size} inputs exceeds the bound {bound}")]
    EnumerationBound { size: String, bound: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("storage holds a zero subpacket; multiplicative answers are undefined")]
    ZeroSubpacket,

    #[error("decode failure: {0}")]
    Decode(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
