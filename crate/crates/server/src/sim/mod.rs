//! Meeting simulator: trace format, synthetic trace generation, replay
//! against a service or a live server, and oracle verification.

pub mod client;
pub mod generate;
pub mod oracle;
pub mod run;
pub mod trace;
pub mod verify;

use meetcues_core::snippet::{extract_snippets, ExtractedSnippet, Recording, SnippetError};
use meetcues_core::{Event, Hashtag, MeetingId, MeetingSession, Salt, SnippetConfig};
use thiserror::Error;

pub use run::{simulate, RunReport, SimOptions, Started, Target};
pub use trace::{Action, Trace, TraceLine};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("rejected with {status} {code}: {message}")]
    Rejected { status: u16, code: String, message: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("{0}")]
    Script(String),
}

impl SimError {
    pub fn status(&self) -> Option<u16> {
        match self {
            SimError::Rejected { status, .. } => Some(*status),
            _ => None,
        }
    }
}

/// Snippet extraction outside any server: an event log, a recording and the
/// meeting length are all it needs.
pub fn extract_offline(
    meeting: &MeetingId,
    events: &[Event],
    wav: &[u8],
    duration_ms: u64,
    offset_ms: u64,
    config: &SnippetConfig,
) -> Result<Vec<ExtractedSnippet>, SnippetError> {
    let session = MeetingSession::new(
        meeting.clone(),
        Hashtag::new("aaaaaa").expect("valid placeholder"),
        "offline",
        "offline",
        true,
        Salt::from_bytes([0; 16]),
    )
    .and_then(|s| s.start(0))
    .and_then(|s| s.end(duration_ms))
    .expect("placeholder session is valid");
    extract_snippets(events, Some(Recording { wav, offset_ms }), &session, config)
}
