use thiserror::Error;

use crate::ad::AdError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("vector {0:?} lies outside the cone domain")]
    OutsideCone(Vec<f64>),
    #[error("fiber vector {0:?} lies outside the declared fiber domain")]
    OutsideFiberDomain(Vec<f64>),
    #[error("lapse function is not positive at x = {0:?}")]
    NonPositiveLambda(Vec<f64>),
    #[error("unknown zoo entry `{0}`")]
    UnknownZooEntry(String),
    #[error("parameter `{name}` = {value} is outside [{min}, {max}]")]
    ParamOutOfRange { name: String, value: f64, min: f64, max: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("configuration error at line {line}, column {column}: {message}")]
    ConfigAt { line: usize, column: usize, message: String },
    #[error("fiber Hessian is ill-conditioned (condition {cond:.3e}) at s = {s}")]
    IllConditionedHessian { s: f64, cond: f64 },
    #[error("integrator step size underflow at s = {0}")]
    StepFailure(f64),
    #[error("flow left the chart at parameter {0}")]
    FlowEscape(f64),
    #[error("velocity left the cone at parameter {0}")]
    ConeExit(f64),
    #[error("Lagrangian is not fiberwise differentiable at K (residual {0:.3e})")]
    NotDifferentiableAtK(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("zero vector where a nonzero one is required")]
    ZeroVector,
    #[error("zero velocity")]
    ZeroVelocity,
    #[error("Newton iteration did not converge (residual {0:.3e})")]
    NewtonDivergence(f64),
    #[error("shooting did not converge (best endpoint error {best_error:.3e})")]
    NoConvergence { best_error: f64, best_direction: Vec<f64>, best_length: f64 },
    #[error("point {0:?} is outside the grid box")]
    OutOfBox(Vec<f64>),
    #[error("causal classification disagrees: sign of L says {by_sign}, thresholds say {by_threshold}")]
    InconsistentClassification { by_sign: String, by_threshold: String },
    #[error("no data: {0}")]
    NoData(String),
    #[error("operation requires a stationary splitting Lagrangian")]
    NotSplitting,
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
