use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("agent index {index} out of range for {agents} agents")]
    AgentIndexOutOfRange { index: usize, agents: usize },

    #[error("invalid timer configuration: {0}")]
    InvalidTimer(String),

    /// `tau_max` does not satisfy `tau_max < beta^2 / (3 K^3)`.
    #[error("tau_max = {tau_max} violates tau_max < beta^2/(3K^3) = {bound} (beta = {beta}, K = {lipschitz})")]
    BoundViolation {
        tau_max: f64,
        bound: f64,
        beta: f64,
        lipschitz: f64,
    },

    #[error("invalid initial state: {0}")]
    InvalidInit(String),

    #[error("cannot flow for {duration} with only {tau} left on the timer")]
    FlowPastJump { duration: f64, tau: f64 },

    #[error("state is not in the jump set (tau = {tau})")]
    NotInJumpSet { tau: f64 },

    #[error("non-finite state at hybrid time (t = {t}, j = {j})")]
    NumericalFailure { t: f64, j: u64 },

    #[error("check not applicable: {0}")]
    InapplicableHypothesis(String),

    #[error("need at least {needed} usable samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("series shows no decay (fitted slope {slope})")]
    NoDecay { slope: f64 },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("internal error: {0}")]
    Internal(String),
}
