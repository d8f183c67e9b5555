use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular input: position at the origin")]
    Singular,

    #[error("integrator step failure at t = {t} s (step {step} s cannot meet tolerance)")]
    StepFailure { t: f64, step: f64 },

    #[error("orbit is not elliptic (specific energy {energy} km^2/s^2 >= 0)")]
    NonElliptic { energy: f64 },

    #[error("energy {energy} km^2/s^2 outside the elliptic domain")]
    Domain { energy: f64 },

    #[error("hill-region violation{}: conformal factor {factor}", node.map(|n| format!(" at node {n}")).unwrap_or_default())]
    HillViolation { node: Option<usize>, factor: f64 },

    #[error("semi-major axis {a} km below the minimum-energy value {a_min} km")]
    InfeasibleSma { a: f64, a_min: f64 },

    #[error("degenerate transfer plane: endpoints collinear with the central body")]
    DegeneratePlane,

    #[error("point is not on the transfer ellipse (relative conic residual {residual:e})")]
    NotOnEllipse { residual: f64 },

    #[error("heat flow did not converge (scaled residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("degenerate endpoint tangent")]
    TangentDegeneracy,

    #[error("no feasible transfer candidate")]
    EmptyResult,

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
