use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("support of p is not contained in support of q (index {index})")]
    AbsoluteContinuity { index: usize },

    #[error("player count mismatch: {left} vs {right}")]
    PlayerCountMismatch { left: usize, right: usize },

    #[error("invalid input label {0:?}")]
    InvalidLabel(String),

    /// The measure puts mass outside `{0..0, 1..1, e_1, .., e_k}`.
    #[error("measure violates the support assumption: {0}")]
    SupportViolation(String),

    #[error("cannot condition on a zero-probability branch (b = {bit})")]
    ZeroProbabilityBranch { bit: u8 },

    #[error("splitting infeasible: {0}")]
    SplittingInfeasible(String),

    #[error("signal simulation did not terminate within {0} steps")]
    NonTermination(usize),

    #[error("trivial instance: {0}")]
    TrivialInstance(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("identity check failed: {0}")]
    IdentityViolated(String),

    #[error("protocol tree exceeds {cap} nodes; use a larger time step")]
    Resolution { cap: usize },

    #[error("malformed input: {0}")]
    Malformed(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}
