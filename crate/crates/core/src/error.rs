use alloc::string::String;

/// Errors raised by model construction, pointwise geometry and the hybrid flow.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("metric is not invertible at the evaluated configuration")]
    NonInvertibleMetric,
    #[error("constraint one-forms are linearly dependent (smallest relative singular value {0:e})")]
    DependentConstraints(f64),
    #[error("constraint mass matrix is singular")]
    SingularConstraintMass,
    #[error("grazing contact: |dh(v)| = {normal_speed:e} below tolerance {tolerance:e}")]
    Grazing { normal_speed: f64, tolerance: f64 },
    #[error("state is not approaching the impact surface (dh(v) = {0:e})")]
    NotApproaching(f64),
    #[error("velocity violates the constraints (|eta(v)| = {0:e})")]
    OffConstraint(f64),
    #[error("impact denominator vanishes ({0:e}); the surface is effectively a constraint")]
    VanishingDenominator(f64),
    #[error("vector field is tangent to the impact set (|dh(X)| = {0:e})")]
    TransversalityFailure(f64),
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("state left the domain at t = {0}")]
    DomainExit(f64),
    #[error("Zeno guard triggered at t = {0}")]
    ZenoGuard(f64),
    #[error("grazing impact encountered at t = {0}")]
    GrazingTermination(f64),
    #[error("simultaneous impact on several surfaces at t = {0}")]
    CornerHit(f64),
    #[error("an impact lies inside the finite-difference stencil")]
    ImpactNearStencil,
    #[error("density must be positive, got {0:e}")]
    NonPositiveDensity(f64),
    #[error("degenerate tangent basis")]
    DegenerateBasis,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
