use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("absolute precision must be at least 1")]
    ZeroPrecision,
    #[error("operands live over different primes ({0} and {1})")]
    PrimeMismatch(u64, u64),
    #[error("element is not a unit at precision {precision}")]
    NotAUnit { precision: u32 },
    #[error("dividend valuation {dividend} is below divisor valuation {divisor}")]
    NotDivisible { dividend: u32, divisor: u32 },
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("precision {available} is too small, need at least {required}")]
    PrecisionTooSmall { required: u32, available: u32 },
    #[error("span is rank deficient at precision {precision}")]
    RankDeficientAtPrecision { precision: u32 },
    #[error("matrix is not in GL_3 at precision {precision}")]
    NotInvertible { precision: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("structure tensor is not antisymmetric at ({0}, {1}, {2})")]
    NotAntisymmetric(usize, usize, usize),
    #[error("structure tensor fails the Jacobi identity")]
    JacobiFailure,
    #[error("structure tensor is not in diagonal form")]
    NotDiagonal,
    #[error("lattice is solvable at precision {precision} (a structure constant vanishes)")]
    Unsolvable { precision: u32 },
    #[error("submodule is not closed under the bracket")]
    NotClosed,
    #[error("hypothesis violated: {assertion}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    HypothesisViolated {
        assertion: String,
        context: Option<String>,
    },
    #[error("map is not a Lie algebra morphism at precision")]
    NotAMorphism,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn hypothesis(assertion: impl Into<String>, context: Option<String>) -> Self {
        Error::HypothesisViolated {
            assertion: assertion.into(),
            context,
        }
    }
}
