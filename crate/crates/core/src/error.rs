use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("modulus {0} is not supported here (prime modulus below 2^31 required)")]
    UnsupportedModulus(u64),

    #[error("basis is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("closest vector is not unique (tie at distance {0})")]
    Tie(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no solution found: {0}")]
    NotFound(String),

    #[error("sample budget exhausted: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
