use thiserror::Error;

/// Errors produced by the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precoder problem is infeasible: {0}")]
    Infeasible(String),

    #[error("precoder problem is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
