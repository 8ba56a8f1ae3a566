use thiserror::Error;

/// Errors raised by the library.
///
/// The variants are grouped so that front ends can map them onto a small
/// exit-code taxonomy: configuration problems, data problems and numerical
/// failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate covariate: sample standard deviation is zero")]
    DegenerateCovariate,

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("insufficient local data at {point:?}: {active} active observations, basis dimension {needed}")]
    InsufficientLocalData {
        point: Vec<f64>,
        active: usize,
        needed: usize,
    },

    #[error("no usable grid points: {0}")]
    EmptyUsableRegion(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        replication: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by bad configuration values rather than data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }

    /// True for errors caused by the numbers (empty fits, degenerate data).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::InsufficientLocalData { .. }
            | Error::EmptyUsableRegion(_)
            | Error::Numerical(_)
            | Error::DegenerateCovariate => true,
            Error::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
