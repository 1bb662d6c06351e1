use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] stepfreq_core::Error),
    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
    #[error("output: {0}")]
    Output(String),
}
