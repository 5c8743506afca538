use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("singular design: Gram condition number {condition:e} exceeds {threshold:e}")]
    SingularDesign { condition: f64, threshold: f64 },

    #[error("bandwidth must be positive and finite, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("covariate must be strictly positive, got {0}")]
    NonPositiveCovariate(f64),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty input")]
    EmptyInput,

    #[error("empty chain")]
    EmptyChain,

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("test function is not finite at particle {index}")]
    NonFiniteH { index: usize },

    #[error("log target is not finite at the initial state")]
    NonFiniteTarget,

    #[error("population normalizer is zero on the quadrature grid")]
    ZeroNormalizer,

    #[error("coupling violated: M*tau^2 = {m_tau_sq} < K = {k}")]
    CouplingViolated { m_tau_sq: f64, k: f64 },

    #[error("schedule violation at step {step}: M*tau^2 must increase")]
    ScheduleViolation { step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("simulator failure: {0}")]
    Simulator(String),
}
