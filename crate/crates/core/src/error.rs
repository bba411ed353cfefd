use thiserror::Error;

use crate::metric::PointId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {0} is already live")]
    DuplicateId(PointId),

    #[error("point {0} was deleted earlier; ids may not be reused")]
    ReusedId(PointId),

    #[error("weight of point {id} must be positive, got {weight}")]
    NonpositiveWeight { id: PointId, weight: f64 },

    #[error("point {0} is not part of the declared distance matrix")]
    UnknownMatrixId(PointId),

    #[error("unknown point {0}")]
    UnknownId(PointId),

    #[error("point {id} coincides with live point {other}")]
    CoincidentPoint { id: PointId, other: PointId },

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("space is empty")]
    EmptySpace,

    #[error("space has no pair of points at nonzero distance")]
    DegenerateSpace,

    #[error("center set is empty")]
    EmptyCenters,

    #[error("instance too large for exhaustive search: {n} points, cap is {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("candidate {0} is already present")]
    AlreadyPresent(PointId),

    #[error("candidate {0} is not present")]
    NotPresent(PointId),

    #[error("need at least {needed} candidates, have {available}")]
    NotEnoughCandidates { needed: usize, available: usize },

    #[error("neighbor lists do not hold exactly the current solution")]
    CandidateMismatch,

    #[error("facility cost must be positive, got {0}")]
    NonpositiveLambda(f64),

    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("no bracketing facility cost found on the lambda grid")]
    GridSearchFailed,

    #[error("membership violation: {0}")]
    MembershipViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },

    #[error("cannot write metrics: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;
