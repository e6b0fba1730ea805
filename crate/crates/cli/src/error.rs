use omt_core::OmtError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(OmtError),
    #[error("{0}")]
    Unachievable(OmtError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Unachievable(_) => 4,
        }
    }
}

impl From<OmtError> for CliError {
    fn from(e: OmtError) -> Self {
        match e {
            OmtError::Domain(msg) => CliError::Config(msg),
            OmtError::UnsupportedModel(msg) => CliError::Config(msg),
            e @ OmtError::Unachievable { .. } => CliError::Unachievable(e),
            e => CliError::Numerical(e),
        }
    }
}
