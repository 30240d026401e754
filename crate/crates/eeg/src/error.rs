use thiserror::Error;

#[derive(Debug, Error)]
pub enum EegError {
    #[error("EDF truncated at byte {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("EDF header field `{field}` at byte {offset}: {msg}")]
    Header {
        offset: usize,
        field: &'static str,
        msg: String,
    },
    #[error("EDF record layout: {0}")]
    RecordSize(String),
    #[error("EDF annotation at byte {offset}: {msg}")]
    Annotation { offset: usize, msg: String },
    #[error("recording of {len} samples is shorter than window {width}")]
    TooShort { len: usize, width: usize },
    #[error("user {user} class {label} has {count} segments, need at least 2 to split")]
    SmallClass {
        user: usize,
        label: usize,
        count: usize,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("segment cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EegError>;
