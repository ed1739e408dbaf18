use thiserror::Error;

/// Invalid model or learning parameters.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("{what} has no unique stationary distribution")]
    DegenerateChain { what: &'static str },
    #[error("queue capacity must be at least 1, got {0}")]
    InvalidCapacity(u32),
    #[error("invalid level scheme: {0}")]
    InvalidLevelScheme(String),
    #[error("invalid learning parameter: {0}")]
    InvalidHyper(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("reward {0} is not finite")]
    NonFiniteReward(f64),
    #[error("state index {index} out of range (state count {count})")]
    StateOutOfRange { index: usize, count: usize },
    #[error("action {0} is not allowed by the action mask")]
    ActionNotAllowed(&'static str),
    #[error("action mask is empty")]
    EmptyMask,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("full state space has {states} states, above the ceiling of {ceiling}; use smaller queue capacities")]
    StateSpaceTooLarge { states: u128, ceiling: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rl(#[from] RlError),
}

/// Reading or writing a persisted artifact failed.
#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed artifact at line {line}: {message}")]
    Format { line: usize, message: String },
}
