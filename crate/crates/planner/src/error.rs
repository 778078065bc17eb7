use thiserror::Error;

/// Errors shared across the planning toolkit.
#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("node {0} has no latitude/longitude and no fallback distance mode was requested")]
    MissingCoordinates(String),

    #[error("topology has no nodes")]
    EmptyTopology,

    #[error("all flow counts are zero; the gcd in the lambda bound is undefined")]
    AllFlowsZero,

    #[error("index {index} out of range for instance of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("plan is infeasible: {0}")]
    InfeasiblePlan(String),

    #[error("invalid formulation: {0}")]
    InvalidFormulation(String),

    #[error("numerical breakdown in the simplex solver: {0}")]
    NumericalBreakdown(String),

    #[error("instance too large for exhaustive search: n = {0} (limit 8)")]
    TooLarge(usize),

    #[error("invalid 3-partition data: {0}")]
    InvalidPartitionData(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("validation failure: {0}")]
    ValidationFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PlannerError {
    /// Stable process exit code for each error class, used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            PlannerError::MalformedInput(_) => 10,
            PlannerError::MissingCoordinates(_) => 11,
            PlannerError::EmptyTopology => 12,
            PlannerError::AllFlowsZero => 13,
            PlannerError::IndexOutOfRange { .. } => 14,
            PlannerError::InfeasiblePlan(_) => 15,
            PlannerError::InvalidFormulation(_) => 16,
            PlannerError::NumericalBreakdown(_) => 17,
            PlannerError::TooLarge(_) => 18,
            PlannerError::InvalidPartitionData(_) => 19,
            PlannerError::PreconditionViolated(_) => 20,
            PlannerError::ValidationFailure(_) => 21,
            PlannerError::Io(_) => 22,
        }
    }
}

pub type Result<T> = std::result::Result<T, PlannerError>;
