use thiserror::Error;

#[derive(Debug, Error)]
pub enum WirelessError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("negative transmit power {0} W")]
    NegativePower(f64),
    #[error("cpu trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WirelessError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> WirelessError {
    WirelessError::InvalidParam {
        name,
        reason: reason.into(),
    }
}
