use crate::market::Policy;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{name} must be a positive finite rate, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },

    #[error("edge probability must lie strictly inside (0, 1), got {value}")]
    ProbabilityOutOfRange { value: f64 },

    #[error("horizon must be positive and finite, got {value}")]
    HorizonNonPositive { value: f64 },

    #[error("burn-in {burn_in} must lie in [0, horizon) with horizon {horizon}")]
    BurnInTooLarge { burn_in: f64, horizon: f64 },

    #[error("sample time {time} lies outside [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },

    #[error("replication count must be at least 1")]
    NoReplications,

    #[error("policy list must be nonempty")]
    EmptyPolicyList,

    #[error(
        "truncation leak {leak:.3e} exceeds threshold {threshold:.3e}; \
         retry with a grid of at least {suggested_a}x{suggested_b}"
    )]
    GridTooSmall {
        leak: f64,
        threshold: f64,
        suggested_a: u32,
        suggested_b: u32,
    },

    #[error("stationary solver failed to converge after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("distribution was computed for policy {found:?}, expected {expected:?}")]
    PolicyMismatch {
        expected: Policy,
        found: Option<Policy>,
    },

    #[error("grid mismatch: {left_a}x{left_b} vs {right_a}x{right_b}")]
    GridMismatch {
        left_a: u32,
        left_b: u32,
        right_a: u32,
        right_b: u32,
    },

    #[error(
        "empirical distribution did not come within tv <= {epsilon} of stationary \
         by t = {budget} (best tv {best_tv:.4} at t = {best_time})"
    )]
    NotConvergedWithinBudget {
        epsilon: f64,
        budget: f64,
        best_tv: f64,
        best_time: f64,
    },

    #[error("epsilon must be positive, got {value}")]
    EpsilonOutOfRange { value: f64 },

    #[error("sigma {name} = {value} is too large for this market (must be < {limit})")]
    SigmaOutOfRange {
        name: &'static str,
        value: f64,
        limit: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
