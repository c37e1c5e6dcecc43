use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("all velocities coincide; the hull has no direction to project on")]
    DegenerateSet,
    #[error("point lies outside the convex hull (beyond tolerance)")]
    OutsideHull,
    #[error("velocities are not affinely independent or their number is not D+1")]
    NotMinimal,
    #[error("point is not in the interior of the support")]
    OutsideSupport,
    #[error("point is not in the relative interior of face {0:?}")]
    OutsideFace(Vec<usize>),
    #[error("no finite rate bound is available on [0, {0}]")]
    UnboundedRate(f64),
    #[error("velocity {0} has a deterministic waiting time; no density exists")]
    AtomicLaw(usize),
    #[error("terminal velocity {0} has zero displacements")]
    InconsistentCounts(usize),
    #[error("state space already has full dimension; nothing to reduce")]
    AlreadyFullDim,
    #[error("switching probabilities into the subset are not constant: row {row} gives {value}, expected {expected}")]
    ConditionViolated { row: usize, value: f64, expected: f64 },
    #[error("evaluation point is closer than {required} to the support boundary (distance {distance})")]
    BoundaryTooClose { distance: f64, required: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("subset enumeration supports at most 9 velocities, got {0}")]
    TooManyVelocities(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
