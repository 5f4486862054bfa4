use meetcues_core::snippet::SnippetError;
use meetcues_core::wav::WavError;
use meetcues_core::ValidationError;
use thiserror::Error;

use crate::store::StoreError;

/// Failure of a service operation. Each variant maps to one HTTP status.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("invalid audio: {0}")]
    Audio(#[from] WavError),
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(&'static str),
    #[error("{0} not found")]
    NotFound(&'static str),
    #[error("{0}")]
    Conflict(String),
    #[error("meeting has ended")]
    Gone,
    #[error("summary is not ready yet")]
    Pending,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    /// Stable machine-readable code for error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Validation(_) | ServiceError::Audio(_) => "validation",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Forbidden(_) => "forbidden",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Gone => "gone",
            ServiceError::Pending => "pending",
            ServiceError::Store(_) | ServiceError::Internal(_) => "internal",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::Validation(_) | ServiceError::Audio(_) => 400,
            ServiceError::Unauthorized => 401,
            ServiceError::Forbidden(_) => 403,
            ServiceError::NotFound(_) | ServiceError::Pending => 404,
            ServiceError::Conflict(_) => 409,
            ServiceError::Gone => 410,
            ServiceError::Store(_) | ServiceError::Internal(_) => 500,
        }
    }
}

impl From<SnippetError> for ServiceError {
    fn from(e: SnippetError) -> Self {
        match e {
            SnippetError::NotEnded => ServiceError::Conflict("meeting has not ended".into()),
            SnippetError::Decode(w) => ServiceError::Audio(w),
        }
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;
