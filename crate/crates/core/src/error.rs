use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("scale parameter must be positive and finite, got {0}")]
    NonPositiveScale(f64),
    #[error("invalid mixing weights: {0}")]
    InvalidWeights(String),
    #[error("{weights} weights but {components} components")]
    LengthMismatch { weights: usize, components: usize },
    #[error("data set is empty")]
    EmptyData,
    #[error("need at least {required} observations, got {got}")]
    InsufficientData { got: usize, required: usize },
    #[error("data contains a non-finite value at index {0}")]
    NonFiniteData(usize),
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("tail exponent {beta} is incompatible with the {family} family: sup |z|^beta f(z) diverges")]
    IncompatibleEnvelope { family: &'static str, beta: f64 },
    #[error("tail exponent {beta} must exceed {required}")]
    TailExponent { beta: f64, required: f64 },
    #[error("schedule exponents must satisfy 0 <= d_tilde < d < 1 (d_tilde = {d_tilde}, d = {d})")]
    ScheduleOrder { d_tilde: f64, d: f64 },
    #[error("grid has {size} points, limit is {limit}")]
    GridTooLarge { size: u128, limit: u128 },
    #[error("component count mismatch: {left} vs {right}")]
    ComponentCountMismatch { left: usize, right: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parameter vector is infeasible under the {0} regime")]
    Infeasible(&'static str),
    #[error("every start has a penalized objective of -inf")]
    AllStartsDiverged,
}
