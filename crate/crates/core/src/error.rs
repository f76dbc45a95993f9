use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids or shearing frames (s = {left} vs {right})")]
    FrameMismatch { left: f64, right: f64 },

    #[error("Poisson right-hand side has mean {mean:e} (norm {norm:e}); the problem is ill-posed")]
    NonZeroMean { mean: f64, norm: f64 },

    #[error("velocity divergence {relative:e} exceeds tolerance {tolerance:e}")]
    Divergence { relative: f64, tolerance: f64 },

    #[error("time {t} is earlier than the last accumulated sample {last}")]
    TimeRegression { t: f64, last: f64 },

    #[error("accumulator is at t = {accumulated} but the state is at t = {state}")]
    StaleAccumulator { accumulated: f64, state: f64 },

    #[error("decay-rate fit needs at least {needed} positive samples in the window, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("decay-rate fit got a non-positive value {value} at t = {t}")]
    NonPositiveSample { t: f64, value: f64 },

    #[error("step size {dt:e} fell below dt_min at t = {t} (|n|_inf = {n_linf:e}); blow-up suspected")]
    BlowupSuspected { t: f64, dt: f64, n_linf: f64 },
}
