use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate weighting: {0}")]
    Degenerate(String),
    #[error("conditioning on a null event: {0}")]
    Conditioning(String),
    #[error("integral diverges: {0}")]
    Divergence(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported case: {0}")]
    Unsupported(String),
    #[error("size limit exceeded: {0}")]
    Size(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("internal logic error: {0}")]
    Logic(String),
}

pub type Result<T> = std::result::Result<T, Error>;
