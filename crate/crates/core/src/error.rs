use thiserror::Error;

/// Errors raised by the model, its discretization and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be finite and strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("alpha = (sigma_bar_1 + sigma_bar_2) / sigma_tilde = {alpha} must exceed 2 (nutrient supply above the proliferation threshold)")]
    AlphaOutOfRange { alpha: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("profile sample {index} is {value}, profiles must be strictly positive")]
    NonPositiveProfile { index: usize, value: f64 },

    #[error("no sign change of f_alpha located below x = {limit} (alpha = {alpha})")]
    BracketNotFound { alpha: f64, limit: f64 },

    #[error("y = {y} lies outside the stationary layer [0, {rho_star}]")]
    DomainError { y: f64, rho_star: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("discrete system is numerically singular ({0})")]
    SingularSystem(String),

    #[error("profile pinches off: min = {min:e}, mean = {mean:e}")]
    PinchOff { min: f64, mean: f64 },

    #[error("tolerance not reached after {iterations} iterations (last width {width:e})")]
    ToleranceNotReached { iterations: usize, width: f64 },

    #[error("step from t = {t} with dt = {dt:e} rejected: positivity lost")]
    StepRejected { t: f64, dt: f64 },

    #[error("fit window for mode {k} holds {samples} samples, need at least 3")]
    WindowTooShort { k: usize, samples: usize },

    #[error("amplitude of mode {k} is below the noise floor at the start of the fit window")]
    AmplitudeUnderflow { k: usize },

    #[error("mode {0} is not tracked in this trace")]
    ModeNotTracked(usize),

    #[error("stationary state failed its consistency check: {0}")]
    InconsistentState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
