use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: siht::Error,
    },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl ExpError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            ExpError::Config(_) => 2,
            ExpError::Numerical { .. } => 3,
            ExpError::Io(_) | ExpError::Csv(_) => 1,
        }
    }
}

pub type ExpResult<T> = std::result::Result<T, ExpError>;

/// Attaches a stage label to library errors.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> ExpResult<T>;
}

impl<T> Stage<T> for siht::Result<T> {
    fn stage(self, stage: &'static str) -> ExpResult<T> {
        self.map_err(|source| ExpError::Numerical { stage, source })
    }
}
