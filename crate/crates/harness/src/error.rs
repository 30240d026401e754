use std::path::PathBuf;

use thiserror::Error;

use crate::config::FieldError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldError>),
    #[error("override: {0}")]
    Override(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    TomlRead(#[from] toml::de::Error),
    #[error(transparent)]
    Wireless(#[from] bciqoe_wireless::WirelessError),
    #[error(transparent)]
    Eeg(#[from] bciqoe_eeg::EegError),
    #[error(transparent)]
    Env(#[from] bciqoe_env::EnvError),
    #[error(transparent)]
    Learner(#[from] bciqoe_learners::LearnerError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
