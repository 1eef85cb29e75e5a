use thiserror::Error;

/// Shared error vocabulary. Every failure is a meaningful signal; nothing is
/// coerced, rounded, or silently truncated.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("valuation of an exact zero is undefined")]
    ExactZero,
    #[error("matrix is singular (to working precision)")]
    SingularMatrix,
    #[error("generators do not span a full-rank lattice")]
    RankDeficient,
    #[error("point is not integral: {0}")]
    NotIntegral(String),
    #[error("linear system has no solution of the required shape: {0}")]
    NoSolution(String),
    #[error("matrix does not satisfy the symmetric-space condition A·σ(A) = 1")]
    NotInSymmetricSpace,
    #[error("input is not strongly regular semisimple: {0}")]
    NotSRS(String),
    #[error("group membership validation failed: {0}")]
    MembershipFailed(String),
    #[error("coweight totals differ: {0} vs {1}")]
    SumMismatch(i64, i64),
    #[error("coweight is not fixed by the outer involution")]
    NotSigmaOutFixed,
    #[error("Cartan stratum {0:?} is not dominated by the boundary coweight {1:?}")]
    StratumOutOfRange(Vec<i64>, Vec<i64>),
    #[error("constraints unsatisfiable after retry budget: {0}")]
    ConstraintUnsatisfiable(String),
    #[error("count did not stabilize: {0}")]
    Unstable(String),
    #[error("direct orbital-integral route unsupported at rank {0}")]
    RankUnsupported(usize),
    #[error("configuration error: {0}")]
    ConfigError(String),
}

pub type Result<T> = std::result::Result<T, Error>;
