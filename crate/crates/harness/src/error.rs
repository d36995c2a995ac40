use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] mcvd_core::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("no results to report")]
    EmptyReport,
}

impl HarnessError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }
}
