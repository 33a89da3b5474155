use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown agent id {0}")]
    UnknownAgent(u64),

    #[error("goal of agent {0} coincides with its position")]
    DegenerateGoal(u64),

    #[error("no admissible goal found after {0} samples")]
    GoalSampling(usize),

    #[error("missing destination for agent {0}")]
    MissingDestination(u64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sampling period mismatch: expected {expected} s, found {found} s")]
    DtMismatch { expected: f64, found: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("node {0} is not part of the recorded graph")]
    NotRecorded(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("weight archive checksum mismatch")]
    Checksum,

    #[error("unsupported weight archive version {0}")]
    Version(u32),

    #[error("unknown section '{0}'")]
    UnknownSection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
