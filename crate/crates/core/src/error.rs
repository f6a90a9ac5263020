use thiserror::Error;

use crate::graph::Violation;
use crate::milp::MipSolution;

fn join(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("candidate edge `{0}` duplicates an existing edge id")]
    DuplicateCandidate(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LpError {
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum MipError {
    #[error("branch-and-bound node limit of {limit} reached")]
    NodeLimit {
        limit: usize,
        incumbent: Option<Box<MipSolution>>,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("malformed mixed-integer program: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("structural assumption violated: {0}")]
    Structure(String),
    #[error("scenario dimension mismatch: {0}")]
    Dimension(String),
    #[error("scenario {index}: {source}")]
    Scenario {
        index: usize,
        #[source]
        source: Box<ReliabilityError>,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mip(#[from] MipError),
}

impl ReliabilityError {
    /// True when the root cause is a solver iteration or node limit.
    pub fn is_solver_limit(&self) -> bool {
        match self {
            ReliabilityError::Lp(LpError::IterationLimit(_)) => true,
            ReliabilityError::Mip(MipError::NodeLimit { .. })
            | ReliabilityError::Mip(MipError::Lp(LpError::IterationLimit(_))) => true,
            ReliabilityError::Scenario { source, .. } => source.is_solver_limit(),
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("budget must be non-negative, got {0}")]
    NegativeBudget(f64),
    #[error("invalid design problem: {0}")]
    Invalid(String),
    #[error("scenario sets differ: {0}")]
    ScenarioMismatch(String),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mip(#[from] MipError),
}

impl DesignError {
    pub fn is_solver_limit(&self) -> bool {
        match self {
            DesignError::Lp(LpError::IterationLimit(_)) => true,
            DesignError::Mip(MipError::NodeLimit { .. })
            | DesignError::Mip(MipError::Lp(LpError::IterationLimit(_))) => true,
            DesignError::Reliability(r) => r.is_solver_limit(),
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum RbdError {
    #[error("invalid block diagram: {0}")]
    Invalid(String),
    #[error("malformed block diagram JSON: {0}")]
    Json(#[from] serde_json::Error),
}
