use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown subcommand '{0}'")]
    UnknownSubcommand(String),
    #[error("conflicting flags: {0}")]
    ConflictingFlags(String),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Data { path: PathBuf, msg: String },
    #[error(transparent)]
    Model(#[from] wismc::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Data {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// 1 usage, 2 data, 3 numeric or model.
    pub fn exit_code(&self) -> i32 {
        use wismc::Error as E;
        match self {
            CliError::UnknownSubcommand(_) | CliError::ConflictingFlags(_) | CliError::Usage(_) => {
                1
            }
            CliError::Io { .. } | CliError::Data { .. } => 2,
            CliError::Model(e) => match e {
                E::EvenStateCount(_) | E::InvalidConfig(_) | E::InvalidThreshold(_) => 1,
                E::MalformedRow(_)
                | E::NonMonotoneTime(_)
                | E::NonPositivePrice(_)
                | E::EmptyInput
                | E::TooFewSamples { .. }
                | E::SeriesTooShort { .. }
                | E::Json(_) => 2,
                _ => 3,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
