use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every variant names the operation that failed.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{op}: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{op}: invalid argument: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
    #[error("{op}: interiors of input cubes overlap")]
    InteriorOverlap { op: &'static str },
    #[error("{op}: point is not in the set")]
    NotInSet { op: &'static str },
    #[error("{op}: level {level} not built (depth {built})")]
    LevelNotBuilt {
        op: &'static str,
        level: usize,
        built: usize,
    },
    #[error("{op}: resource limit exceeded: {detail}")]
    ResourceLimit { op: &'static str, detail: String },
    #[error("{op}: fuel exhausted after {used} units")]
    FuelExhausted { op: &'static str, used: usize },
    #[error("{op}: budget exceeded: {detail}")]
    BudgetExceeded { op: &'static str, detail: String },
    #[error("{op}: promise violated: {detail}")]
    PromiseViolated { op: &'static str, detail: String },
    #[error("{op}: fixed point on the boundary could not be excluded; index undefined")]
    BoundaryFixedPoint { op: &'static str },
    #[error("{op}: unsupported dimension {dim}")]
    UnsupportedDimension { op: &'static str, dim: usize },
    #[error("{op}: malformed input: {detail}")]
    Malformed { op: &'static str, detail: String },
    #[error("{op}: parse error: {detail}")]
    Parse { op: &'static str, detail: String },
    #[error("{op}: i/o error: {detail}")]
    Io { op: &'static str, detail: String },
}

impl Error {
    pub fn op(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { op, .. }
            | Error::InvalidArgument { op, .. }
            | Error::InteriorOverlap { op }
            | Error::NotInSet { op }
            | Error::LevelNotBuilt { op, .. }
            | Error::ResourceLimit { op, .. }
            | Error::FuelExhausted { op, .. }
            | Error::BudgetExceeded { op, .. }
            | Error::PromiseViolated { op, .. }
            | Error::BoundaryFixedPoint { op }
            | Error::UnsupportedDimension { op, .. }
            | Error::Malformed { op, .. }
            | Error::Parse { op, .. }
            | Error::Io { op, .. } => op,
        }
    }
}

pub(crate) fn check_dim(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { op, expected, got })
    }
}
