use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("clarity value {0} outside [0, 1]")]
    InvalidClarity(f64),
    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),
    #[error("target clarity {target} is not reachable (limit {limit})")]
    UnreachableTarget { target: f64, limit: f64 },
    #[error("{count} cells have unreachable targets (first {first:?}, clarity limit {limit})")]
    UnreachableCells {
        count: usize,
        first: Vec<usize>,
        limit: f64,
    },
    #[error("matrix is singular or not positive definite: {0}")]
    SingularMatrix(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("integration diverged at t = {t}")]
    IntegrationDiverged { t: f64 },
    #[error("HJB solver diverged at t = {t}")]
    SolverDiverged { t: f64 },
    #[error("control {0:?} outside the control box")]
    RejectedInput(Vec<f64>),
    #[error("query point outside the grid domain")]
    OutOfDomain,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("safety constraint infeasible within control bounds (slack {slack})")]
    Infeasible { slack: f64 },
}
