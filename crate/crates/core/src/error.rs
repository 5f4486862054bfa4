use thiserror::Error;

/// Rejection of a value that would break a domain invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("title must be 1..=200 characters, got {0}")]
    Title(usize),
    #[error("hashtag must be 6 characters from the join alphabet: {0:?}")]
    Hashtag(String),
    #[error("meeting id must be non-empty lowercase alphanumeric: {0:?}")]
    MeetingId(String),
    #[error("malformed email address")]
    Email,
    #[error("comment text must be 1..=2000 characters, got {0}")]
    CommentText(usize),
    #[error("comment id must be non-empty: {0:?}")]
    CommentId(String),
    #[error("event sequence numbers start at 1")]
    ZeroSeq,
    #[error("expected {expected} hex-encoded bytes")]
    Hex { expected: usize },
    #[error("mood {0} outside [-1, 1]")]
    MoodRange(f64),
    #[error("inconsistent {0}")]
    Inconsistent(&'static str),
    #[error("invalid snippet config: {0}")]
    Config(&'static str),
    #[error("illegal transition {from} -> {to}")]
    Transition { from: &'static str, to: &'static str },
}

pub type Result<T, E = ValidationError> = std::result::Result<T, E>;
