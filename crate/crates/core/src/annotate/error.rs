use std::time::Duration;

use thiserror::Error;

/// Failure talking to an LLM backend.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// Rate limiting or a server-side fault; worth retrying.
    #[error("transient backend failure (status {status:?}): {message}")]
    Transient { status: Option<u16>, message: String },
    #[error("authentication failed (status {status}): check the API key")]
    Auth { status: u16 },
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("backend error: {0}")]
    Fatal(String),
    #[error("retries exhausted after {attempts} attempts; last error: {last}")]
    RetriesExhausted { attempts: u32, last: Box<BackendError> },
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transient { .. } | BackendError::Timeout(_))
    }
}
