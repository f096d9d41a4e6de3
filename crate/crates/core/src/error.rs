use thiserror::Error;

/// Errors raised by the solver, the geometry layer and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {0}: node count must be even and at least 8")]
    InvalidGridSize(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("non-finite entry in grid function (row {row}, component {component})")]
    NonFiniteInput { row: usize, component: usize },

    #[error("point at distance {distance:.6e} from the manifold lies outside the safe tube (radius {limit:.6e})")]
    OutsideTube { distance: f64, limit: f64 },

    #[error("flow left the safe tube at node {node}, t = {t}: distance {distance:.6e} >= {limit:.6e}")]
    FlowLeftTube {
        node: usize,
        t: f64,
        distance: f64,
        limit: f64,
    },

    #[error("target manifold is not a hypersurface")]
    NotAHypersurface,

    #[error("formulation requires a sphere target")]
    NotASphere,

    #[error("map does not take values on the unit sphere (max | |u| - 1 | = {max_deviation:.3e})")]
    NotOnSphere { max_deviation: f64 },

    #[error("initial datum is off the manifold (max distance {distance:.3e})")]
    OffManifold { distance: f64 },

    #[error("closest-point Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("non-finite value detected at step {step}, t = {t}")]
    NonFinite { step: usize, t: f64 },

    #[error("constraint violation {violation:.6e} exceeded threshold {threshold:.6e} at t = {t}")]
    ConstraintBlowup {
        t: f64,
        violation: f64,
        threshold: f64,
    },

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
