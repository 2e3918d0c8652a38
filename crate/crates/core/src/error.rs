use thiserror::Error;

/// Errors raised by the model, discretization, solver and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("order sigma = {0} outside the admissible range (1,2)")]
    SigmaOutOfRange(f64),

    #[error("boundary datum is not convex: hessian has eigenvalue {eigenvalue:.3e} at x = {at:?}")]
    NotConvex { at: Vec<f64>, eigenvalue: f64 },

    #[error("non-finite sample at node {index:?} (x = {at:?})")]
    NonFiniteSample { index: Vec<i64>, at: Vec<f64> },

    #[error("operator evaluation produced a non-finite value at x = {at:?}")]
    NonFiniteOperator { at: Vec<f64> },

    #[error("point {at:?} lies outside the solver region")]
    OutsideSolverRegion { at: Vec<f64> },

    #[error("quadrature did not converge: {0}")]
    QuadratureDiverged(String),

    #[error("envelope search radius {radius:.4} exceeds the box half-width {box_radius:.4}; use a larger box or a smaller epsilon")]
    EnvelopeWindowTooLarge { radius: f64, box_radius: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("barrier search failed: {reason} (worst node x = {worst_node:?})")]
    BarrierFailed {
        reason: String,
        worst_node: Vec<f64>,
    },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    MaxIterations {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("residual oscillates (increased 3 consecutive times at iteration {iteration}); reduce the damping")]
    Oscillation { iteration: usize, history: Vec<f64> },

    #[error("continuation stalled at eps = {eps:.3e}: gaps stopped decreasing; tighten the residual tolerance relative to the continuation tolerance")]
    ContinuationStalled { eps: f64, gaps: Vec<f64> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
