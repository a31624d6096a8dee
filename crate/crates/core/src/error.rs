use thiserror::Error;

/// Failures raised by model construction and the saddle-point oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("objective is not convex: smallest Hessian eigenvalue {min_eigenvalue:e}")]
    NotConvex { min_eigenvalue: f64 },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("no saddle point: {0}")]
    NoSaddlePoint(NoSaddleReason),
    #[error("multiplier set is empty (residual {residual:e})")]
    EmptyMultiplierSet { residual: f64 },
    #[error("operation requires {0}")]
    Unsupported(&'static str),
}

/// Why a quadratic saddle problem has no saddle point.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NoSaddleReason {
    /// `b` is not in the range of `A`.
    #[error("constraints are infeasible, b is outside range(A) (residual {residual:e})")]
    Infeasible { residual: f64 },
    /// The objective is unbounded below on the feasible set.
    #[error("objective is unbounded below on the feasible set (residual {residual:e})")]
    Unbounded { residual: f64 },
}

/// Failures raised while integrating a flow.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("numerical blow-up (non-finite state) at t = {t}")]
    BlowUp { t: f64 },
    #[error("adaptive step size underflow (h = {h:e}) at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("state dimension {found} does not match field dimension {expected}")]
    Dimension { expected: usize, found: usize },
}

/// Failures raised by the diagnostic fits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("insufficient data: {usable} usable points in window, need at least {required}")]
    InsufficientData { usable: usize, required: usize },
    #[error("invalid fit window [{lo}, {hi}]")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("series lengths differ ({times} times vs {values} values)")]
    LengthMismatch { times: usize, values: usize },
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("constants must be positive (alpha = {alpha}, beta = {beta}, gamma = {gamma})")]
    InvalidConstants { alpha: f64, beta: f64, gamma: f64 },
}

/// Invalid parameters for the accelerated flow.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("nu must be at least 3, got {0}")]
    Nu(f64),
    #[error("theta = {theta} outside [1/(nu-1), 1/2] = [{lo}, 0.5]")]
    Theta { theta: f64, lo: f64 },
    #[error("mu must be non-negative, got {0}")]
    Mu(f64),
    #[error("t0 must be positive, got {0}")]
    T0(f64),
    #[error("time t = {t} precedes the start time t0 = {t0}")]
    BeforeStart { t: f64, t0: f64 },
}
