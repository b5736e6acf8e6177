use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] spikeattack::Error),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("refused: {0}")]
    Refused(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed config file: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code for the class of failure.
    pub fn exit_code(&self) -> i32 {
        use spikeattack::Error as C;
        match self {
            Error::Config(_) | Error::Toml(_) => 2,
            Error::Io(_) | Error::Json(_) => 3,
            Error::Core(C::Io(_) | C::Parse { .. } | C::UnsupportedVersion { .. } | C::UnsupportedLayerKind(_)) => 3,
            Error::Core(C::InvalidModel(_)) => 3,
            Error::Core(C::NonFinite(_)) | Error::Diverged { .. } => 5,
            Error::Refused(_) => 6,
            Error::Core(_) => 4,
        }
    }
}
