use std::path::PathBuf;

/// Process exit codes; stable across releases.
pub mod exit_code {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERIC: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io { .. } => exit_code::IO,
            Self::Config(_) => exit_code::CONFIG,
            Self::Data(_) => exit_code::DATA,
            Self::Numeric(_) => exit_code::NUMERIC,
        }
    }
}

impl From<fineq::Error> for CliError {
    fn from(e: fineq::Error) -> Self {
        use fineq::Error as E;
        let root = match &e {
            E::Replication { source, .. } => source.as_ref(),
            other => other,
        };
        let msg = e.to_string();
        match root {
            E::InvalidParameter(_) => Self::Config(msg),
            E::Numerical(_) => Self::Numeric(msg),
            _ => Self::Data(msg),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
