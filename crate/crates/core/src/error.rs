use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid bounds: x_min={x_min}, x_max={x_max}, n_points={n_points} (need x_min < x_max and n_points >= 16)")]
    InvalidBounds {
        x_min: f64,
        x_max: f64,
        n_points: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("eigensolver did not converge; residual norms {residuals:?}")]
    Convergence { residuals: Vec<f64> },

    #[error("time step must be positive, got {0}")]
    StepSize(f64),

    #[error("time mesh mismatch: expected {expected} samples, got {found}")]
    MeshMismatch { expected: usize, found: usize },

    #[error("time {t} outside [0, {t_final}]")]
    OutOfRange { t: f64, t_final: f64 },

    #[error("overlap Im<chi|mu|psi> vanishes on the whole mesh; no field update possible")]
    DegenerateOverlap,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
