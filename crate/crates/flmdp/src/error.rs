use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("row {row} of P^{action} is not stochastic (sum {sum})")]
    NotStochastic { action: usize, row: usize, sum: f64 },
    #[error("discount factor must lie in [0, 1), got {0}")]
    InvalidGamma(f64),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid action index {action} at state {state} (k = {k})")]
    InvalidAction {
        action: usize,
        state: usize,
        k: usize,
    },
    #[error("max iterations ({max_iter}) exceeded, residual {residual}")]
    MaxIter { max_iter: usize, residual: f64 },
    #[error("compressed Bellman operator is not contractive (modulus {modulus}); pass force to iterate anyway")]
    NotContractive { modulus: f64 },
    #[error("iteration diverged (iterate norm exceeded overflow guard)")]
    Diverged,
    #[error("unsupported operator-norm pairing: {0}")]
    UnsupportedPairing(String),
    #[error("invalid norm specification: {0}")]
    InvalidNorm(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("weight {which} is not gamma-Lyapunov (beta = {beta})")]
    NotLyapunov { which: &'static str, beta: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("linear solve failed: {0}")]
    SolveFailed(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
