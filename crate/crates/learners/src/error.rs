use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid learner config: {0}")]
    Config(String),
    #[error("user {user} has {have} samples, {need} needed")]
    InsufficientData { user: usize, have: usize, need: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] bciqoe_autodiff::AutodiffError),
    #[error(transparent)]
    Env(#[from] bciqoe_env::EnvError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LearnerError>;
