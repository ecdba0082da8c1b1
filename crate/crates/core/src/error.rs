use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("value {value} out of range for {what} (limit {limit})")]
    OutOfRange {
        what: String,
        value: u64,
        limit: u64,
    },

    #[error("invalid token {token} at frame {frame}, codebook {codebook} (codebook size {codebook_size})")]
    InvalidToken {
        frame: usize,
        codebook: usize,
        token: u32,
        codebook_size: u32,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("unquantized model has no tokens")]
    NoTokens,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated data at byte offset {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },

    #[error("corrupt data at byte offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
