use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid resampling rule: {0}")]
    InvalidRule(String),

    #[error("invalid cooling schedule: {0}")]
    InvalidSchedule(String),

    #[error("time overflow while evaluating tau({0})")]
    Overflow(u64),

    #[error("explicit schedule exhausted: no resampling time after {0}")]
    ScheduleExhausted(u64),

    #[error("{0}")]
    Domain(String),

    #[error("empty sample set")]
    EmptySample,

    #[error("too few replicas: need at least {needed}, got {got}")]
    TooFewReplicas { needed: usize, got: usize },

    #[error("chi-square test has no usable cells: {0}")]
    NoCells(String),

    #[error("oracle cap exceeded: block length {len} > cap {cap}")]
    CapExceeded { len: u64, cap: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
