use thiserror::Error;

/// Errors produced by the belief engines, predictors and experiment tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("score {score} outside domain [0, {upper}]")]
    OutOfDomain { score: f64, upper: f64 },

    #[error("confidence level {0} outside [0, 1]")]
    InvalidLevel(f64),

    #[error("invalid score domain: upper bound {0} must be positive and finite")]
    InvalidDomain(f64),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("csv line {line}: {msg}")]
    Csv { line: u64, msg: String },

    #[error("need at least 2 query levels")]
    TooFewLevels,

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
