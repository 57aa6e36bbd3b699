use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("bundle error: {0}")]
    Bundle(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] nora_core::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::Data(_) | Error::Bundle(_) | Error::Io { .. } => EXIT_DATA,
            Error::Core(e) => match e {
                nora_core::Error::Invariant(_) | nora_core::Error::NonFinite(_) => EXIT_INTERNAL,
                _ => EXIT_DATA,
            },
            Error::Internal(_) => EXIT_INTERNAL,
        }
    }
}
