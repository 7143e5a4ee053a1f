use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("phase error: rho={rho} is outside the light-cone range for kappa={kappa}")]
    Phase { kappa: f64, rho: f64 },
    #[error("singular parameter: {0}")]
    Singular(String),
    #[error("point swallowed at step {step}")]
    Swallowed { step: usize },
    #[error("curve never came within the requested distance")]
    NotHit,
    #[error("numerical instability at step {step}: {detail}")]
    Numerical { step: usize, detail: String },
    #[error("harmonic solve failed: residual {residual:e}")]
    Solver { residual: f64 },
    #[error("calibration did not converge after {iterations} bisection steps")]
    NoConvergence { iterations: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("only {hits} hits at eps={eps} (need {needed})")]
    InsufficientHits { eps: f64, hits: usize, needed: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
