use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("invalid action: {0}")]
    Action(String),
    #[error("user {0} has no segments left and replay is disabled")]
    Exhausted(usize),
    #[error(transparent)]
    Wireless(#[from] bciqoe_wireless::WirelessError),
    #[error(transparent)]
    Eeg(#[from] bciqoe_eeg::EegError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EnvError>;
