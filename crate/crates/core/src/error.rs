use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value produced by {0}")]
    NumericalOverflow(String),
    #[error("trajectory left the escape radius {radius} (norm {norm:e})")]
    TrajectoryEscape { radius: f64, norm: f64 },
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("points do not form an orbit chain (defect {0:e})")]
    NotAnOrbit(f64),
    #[error("Newton iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("singular Newton system: monodromy eigenvalue within 1e-12 of +1")]
    SingularSystem,
    #[error("symbolic enumeration incomplete, failed words: {0:?}")]
    IncompleteEnumeration(Vec<String>),
    #[error("seed orbit is a flip orbit")]
    NotNonflip,
    #[error("bad continuation seed: {0}")]
    BadSeed(String),
    #[error("ambiguous event: {0}")]
    AmbiguousEvent(String),
    #[error("branch switching failed at period doubling near lambda = {0}")]
    BranchSwitchFailure(f64),
    #[error("index conservation violated: {0}")]
    ConservationViolation(String),
    #[error("internal error: {0}")]
    InternalError(String),
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("census mismatch: {0}")]
    CensusMismatch(String),
    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),
    #[error("no prediction: K = J = {0}")]
    NoPrediction(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
