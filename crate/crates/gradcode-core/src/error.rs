use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular system: residual {residual:e} exceeds tolerance {tol:e}")]
    SingularSystem { residual: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fractional repetition needs (s + 1) to divide n, got n = {n}, s = {s}")]
    Divisibility { n: usize, s: usize },

    #[error("cyclic construction failed after {attempts} draws starting at seed {seed}")]
    RetryExhausted { attempts: usize, seed: u64 },

    #[error("survivors {survivors:?} cannot span the all-ones vector (residual {residual:e})")]
    SpanFailure {
        survivors: Vec<usize>,
        residual: f64,
    },

    #[error("{subsets} survivor sets exceed the enumeration budget of {budget}")]
    BudgetExceeded { subsets: u128, budget: u128 },

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("slowdown factor alpha must be finite and > 1, got {0}")]
    InvalidAlpha(f64),

    #[error("AUC needs at least one positive and one negative label")]
    DegenerateLabels,

    #[error("iteration {iteration}: only {arrived} of the {needed} required messages can arrive")]
    StarvedIteration {
        iteration: usize,
        arrived: usize,
        needed: usize,
    },

    #[error("iteration {iteration}: iterate became non-finite")]
    Diverged { iteration: usize },

    #[error("iteration {iteration}: applied gradient deviates from the full gradient by {relative_error:e}")]
    ExactnessViolation {
        iteration: usize,
        relative_error: f64,
    },

    #[error("runs cannot be compared: {0}")]
    MismatchedConfigs(String),
}
