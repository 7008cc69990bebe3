use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{what} = {value} is outside its domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("no steady state: {0}")]
    NoSteadyState(String),

    #[error("no equilibrium of the quadratic reduction lies in [0, 1] (k1 = {k1}, k2 = {k2}, k3 = {k3})")]
    NoRootInUnitInterval { k1: f64, k2: f64, k3: f64 },

    #[error("closed-form pulse response is singular at t = {t}")]
    SingularPulse { t: f64 },

    #[error("non-finite rate encountered at t = {t}")]
    NonFiniteRate { t: f64 },

    #[error("integration did not reach tolerance {tolerance:e} after {refinements} step halvings (last difference {difference:e})")]
    IntegrationNotConverged {
        tolerance: f64,
        refinements: usize,
        difference: f64,
    },

    #[error("time grid must be strictly increasing (violated at index {index})")]
    TimeGrid { index: usize },

    #[error("{what} must be strictly increasing (violated at index {index})")]
    NotIncreasing { what: &'static str, index: usize },

    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("damping factor exceeded its ceiling {ceiling:e} before any step was accepted")]
    DampingOverflow { ceiling: f64 },

    #[error("non-finite residuals at the starting point")]
    NonFiniteStart,

    #[error("surrogate training failed: {0}")]
    Training(String),

    #[error("all {starts} starts failed: {diagnostics}")]
    AllStartsFailed { starts: usize, diagnostics: String },

    #[error("regressors are rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("row {row}: {what} must be positive, got {value}")]
    NonPositive {
        row: usize,
        what: &'static str,
        value: f64,
    },

    #[error("shares outside [0, 1] after normalization at records {rows:?}")]
    ShareOutOfRange { rows: Vec<usize> },

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Input { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
