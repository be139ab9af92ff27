use thiserror::Error;

use crate::remote::OracleError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation: {0}")]
    Validation(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("ranking mismatch: id {0:?} appears in only one ranking")]
    RankingMismatch(String),
    #[error(
        "exhaustive enumeration would visit {combinations} combinations (limit {limit}); use solve_pareto_dp"
    )]
    SizeGuard { combinations: u128, limit: u128 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("search: {0}")]
    Search(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    RawIo(#[from] std::io::Error),
}
