use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite sample at echo {echo}, gate {gate}")]
    NonFiniteSample { echo: usize, gate: usize },

    #[error("block remainder: {echoes} echoes is not a multiple of block size {block}")]
    BlockRemainder { echoes: usize, block: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ill-conditioned Fisher matrix after ridge escalation to {ridge:e}")]
    IllConditionedFisher { ridge: f64 },

    #[error("non-finite cost")]
    NonFiniteCost,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            err,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
