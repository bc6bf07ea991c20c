use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus must be at least 1")]
    ZeroModulus,
    #[error("gcd({a}, {q}) = {gcd} > 1")]
    NotCoprime { a: u64, q: u64, gcd: u64 },
    #[error("argument {value} outside the covered range (limit {limit})")]
    OutOfRange { value: f64, limit: u64 },
    #[error("sieve limit {requested} exceeds the memory budget of {budget} entries (~{bytes} bytes needed)")]
    MemoryBudget {
        requested: u64,
        budget: u64,
        bytes: u64,
    },
    #[error("pole at s = {0}")]
    Pole(String),
    #[error("character {0} is not primitive")]
    NotPrimitive(String),
    #[error("finite Euler product is identically 1 for {0}")]
    TrivialProduct(String),
    #[error("no candidate found within the table window around {x}; widen the table")]
    WidenWindow { x: f64 },
    #[error("convolution value at n = {n} is {value}, not within 1e-6 of an integer")]
    RoundingResidue { n: u64, value: f64 },
    #[error("character set does not form a subgroup: {0}")]
    NotSubgroup(String),
    #[error("imaginary part {im:e} of Z({t}) exceeds tolerance")]
    ImaginaryPart { t: f64, im: f64 },
    #[error("zero count mismatch for {label}: scan found {scanned}, argument principle gives {expected}")]
    CountMismatch {
        label: String,
        scanned: usize,
        expected: i64,
    },
    #[error("zero cache for {0} is not verified up to the requested height")]
    UnverifiedCache(String),
    #[error("suspected multiple zero near {0}")]
    SuspectedMultipleZero(String),
    #[error("contour quadrature failed to converge around {0}")]
    QuadratureNonConvergence(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
