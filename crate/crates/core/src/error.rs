use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
}

impl ConfigError {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("queue index {index} outside 0..={queue_size}")]
    QueueIndex { index: u32, queue_size: u32 },
    #[error("a transmission needs at least one queued packet")]
    EmptyQueueTransmission,
    #[error("access category {ac} cannot transmit in contention zone {zone}")]
    ZoneNotReachable { ac: usize, zone: usize },
    #[error("no backoff slot is available to access category {ac}")]
    EmptySlotRange { ac: usize },
    #[error("degenerate normalisation in {what}")]
    Degenerate { what: &'static str },
    #[error("invalid duration {what} = {value}")]
    Duration { what: &'static str, value: f64 },
    #[error("matrix dimension mismatch: {0}")]
    Dimension(String),
    #[error("steady state did not converge (residual {residual:e})")]
    SteadyState { residual: f64 },
    #[error("idle probability equation has no root in [0, 1]")]
    NoIdleRoot,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulator supports heterogeneous stations only")]
    MultiAcUnsupported,
    #[error("duration must be positive and below {max} s, got {got}")]
    Duration { got: f64, max: f64 },
    #[error("expected one arrival process per access category ({expected}), got {got}")]
    Arrivals { expected: usize, got: usize },
    #[error("confidence intervals need at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("writing the trace failed: {0}")]
    Trace(std::io::Error),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Carries the iterate with the smallest residual.
    #[error("fixed point not reached after {} iterations (residual {:e})", .0.iterations, .0.residual)]
    MaxIterations(Box<crate::solver::SolvedModel>),
}
