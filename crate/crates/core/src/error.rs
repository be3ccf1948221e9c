use thiserror::Error;

/// Errors raised by the library. Each variant maps to one failure mode
/// callers are expected to handle or surface.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),

    #[error("family requires point coordinates but the domain has none")]
    MissingCoordinates,

    #[error("point index {index} out of range for domain of size {size}")]
    PointOutOfRange { index: usize, size: usize },

    #[error("domain mismatch: expected {expected} points, found {found}")]
    DomainMismatch { expected: usize, found: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty sample")]
    EmptySample,

    #[error("empty hypothesis class")]
    EmptyClass,

    #[error("empty graph class")]
    EmptyGraphClass,

    #[error("no incentive-compatible member in the class")]
    NoIncentiveCompatibleMember,

    #[error("social burden undefined: distribution has no mass on label 1")]
    UndefinedBurden,

    #[error("sample violates realizability: positives at distinct singletons {first} and {second}")]
    RealizabilityViolation { first: usize, second: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("hypothesis is not a member of the class")]
    NotInClass,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
