use thiserror::Error;

/// Errors raised while building or evaluating the radar model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("index {index} out of range for {context} (len {len})")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },
    #[error("target at range {range_m} m violates the far-field condition (needs >= {required_m} m)")]
    FarField { range_m: f64, required_m: f64 },
    #[error("point ({angle}, {velocity}, {range}) is not on the grid")]
    OffGrid { angle: f64, velocity: f64, range: f64 },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("sensing matrix needs {requested} entries, budget is {budget}; use the decoupled estimator")]
    BudgetExceeded { requested: usize, budget: usize },
    #[error("range is unidentifiable: the stepped pulses use fewer than two distinct carriers")]
    RangeUnidentifiable,
    #[error("no detections in {stage}")]
    NoDetections { stage: &'static str },
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
