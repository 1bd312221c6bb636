use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chart mismatch: expected {expected}, found {found}")]
    ChartMismatch { expected: String, found: String },
    #[error("invalid plateau bump radii r_in={r_in}, r_out={r_out}")]
    InvalidBump { r_in: f64, r_out: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular Jacobian (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("arrows are not composable: source/target gap {gap:e}")]
    NotComposable { gap: f64 },
    #[error("groupoid instance mismatch: {0}")]
    InstanceMismatch(String),
    #[error("section kind {section} is not defined on instance {instance}")]
    SectionInstanceMismatch { section: String, instance: String },
    #[error("instance {0} carries no symplectic structure")]
    NotSymplectic(String),
    #[error("localization requires closure(U) inside V: {0}")]
    Localization(String),
    #[error("support balls of points {0} and {1} overlap")]
    SupportOverlap(usize, usize),
    #[error("problem is not admissible: {0}")]
    Inadmissible(crate::transitivity::Violation),
    #[error("path planning failed after {retries} retries")]
    PlanningFailed { retries: usize },
    #[error("continuation step failed at path position {position:.6} (step {step:e})")]
    StepFailed { position: f64, step: f64 },
}
