use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coupling b must be non-negative and finite, got {0}")]
    NegativeCoupling(f64),

    #[error(
        "frequency pair outside the admissible set: omega1^2 < 4*omega0 violated \
         (omega0 = {omega0}, omega1 = {omega1})"
    )]
    OutsideOmega { omega0: f64, omega1: f64 },

    #[error("xi must be positive, got {0}")]
    NonPositiveXi(f64),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too short: boundary tail is {tail_ratio:e} of the peak (need < 1e-12)")]
    GridTooShort { tail_ratio: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("zero field has no Nehari rescaling")]
    ZeroField,

    #[error("finite-difference step {step} leaves the admissible set around ({omega0}, {omega1})")]
    StepLeavesOmega { omega0: f64, omega1: f64, step: f64 },

    #[error("internal inconsistency in {what}: {a} vs {b}")]
    InternalInconsistency { what: &'static str, a: f64, b: f64 },

    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),

    #[error("blowup suspected at t = {t}: H1 norm grew by a factor {growth:e}")]
    BlowupSuspected { t: f64, growth: f64 },

    #[error("conservation drift of {quantity} reached {drift:e} at t = {t} (tolerance {tolerance:e})")]
    DriftExceeded {
        t: f64,
        quantity: &'static str,
        drift: f64,
        tolerance: f64,
    },

    #[error("initial data not resolved: spectral tail {tail:e} of peak (need < 1e-10)")]
    UnresolvedInput { tail: f64 },

    #[error("field is not in the tube around the orbit: distance {distance} > radius {radius}")]
    NotInTube { distance: f64, radius: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("the wave is not in the unstable regime")]
    NotUnstableRegime,

    #[error("Hessian of d is singular (det = {0:e})")]
    SingularHessian(f64),

    #[error("modulation matrix H(u) is singular (det = {0:e})")]
    SingularH(f64),

    #[error("no sign change of the Nehari functional for |lambda| <= 1")]
    NoBracket,
}

impl Error {
    /// True for errors caused by invalid user input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NegativeCoupling(_)
                | Error::OutsideOmega { .. }
                | Error::NonPositiveXi(_)
                | Error::InvalidGrid(_)
                | Error::GridTooShort { .. }
                | Error::InvalidConfig(_)
                | Error::UnresolvedInput { .. }
                | Error::StepLeavesOmega { .. }
        )
    }

    /// Short variant name, used in diagnostics and exit messages.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NegativeCoupling(_) => "NegativeCoupling",
            Error::OutsideOmega { .. } => "OutsideOmega",
            Error::NonPositiveXi(_) => "NonPositiveXi",
            Error::NoRoot(_) => "NoRoot",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::GridTooShort { .. } => "GridTooShort",
            Error::GridMismatch => "GridMismatch",
            Error::NonFinite => "NonFinite",
            Error::ZeroField => "ZeroField",
            Error::StepLeavesOmega { .. } => "StepLeavesOmega",
            Error::InternalInconsistency { .. } => "InternalInconsistency",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::BlowupSuspected { .. } => "BlowupSuspected",
            Error::DriftExceeded { .. } => "DriftExceeded",
            Error::UnresolvedInput { .. } => "UnresolvedInput",
            Error::NotInTube { .. } => "NotInTube",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotUnstableRegime => "NotUnstableRegime",
            Error::SingularHessian(_) => "SingularHessian",
            Error::SingularH(_) => "SingularH",
            Error::NoBracket => "NoBracket",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
