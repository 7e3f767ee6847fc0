use crate::geometry::Wrench;
use crate::optimizer::OptimizerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("propeller index {0} out of range (expected 0..8)")]
    PropellerIndex(usize),

    /// The requested hover wrench is outside the range of the allocation
    /// matrix at this tilt angle. `deficit` is target minus achieved wrench.
    #[error("hover wrench not achievable at alpha = {alpha:.6} rad (residual {residual:.3e})")]
    HoverInfeasible { alpha: f64, residual: f64, deficit: Wrench },

    #[error(transparent)]
    Optimizer(#[from] OptimizerError),

    #[error("controller fault at t = {t:.3} s: {reason}")]
    ControllerFault { t: f64, reason: String },

    #[error("simulation diverged at step {step} (t = {t:.3} s): {reason}")]
    Diverged { step: usize, t: f64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("trace format error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Divergence and controller faults end a simulation early; everything
    /// else is a usage or configuration problem.
    pub fn is_runtime_fault(&self) -> bool {
        matches!(self, Error::Diverged { .. } | Error::ControllerFault { .. })
    }
}
