use alloc::string::String;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("supplied drift Jacobian deviates from finite differences by {deviation:e}")]
    JacobianMismatch { deviation: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("trajectory is not periodic (defect {0:e})")]
    NotPeriodic(f64),
    #[error("no Floquet multiplier within 1e-6 of 1 (closest at distance {0:e})")]
    NoTrivialMultiplier(f64),
    #[error("the trivial Floquet multiplier is not simple")]
    NonSimpleMultiplier,
    #[error("not transversally stable (transversal spectral radius {0})")]
    NotTransversallyStable(f64),
    #[error("resonant multipliers: {0}")]
    Resonant(String),
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
