//! Push-stream message model. The stream is a view of the latest published
//! [`PushState`]; a cursor turns successive states into messages so that
//! versions on one connection strictly increase.

use std::sync::Arc;

use meetcues_core::CloudState;
use serde::{Deserialize, Serialize};

/// Latest state of one meeting as seen by subscribers.
#[derive(Debug, Clone, PartialEq)]
pub struct PushState {
    pub cloud: Arc<CloudState>,
    pub ended: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamEvent {
    Ended,
}

/// One message on the push stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PushMessage {
    Cloud { version: u64, cloud: CloudState },
    Recording { recording: bool },
    Event { event: StreamEvent },
}

/// Per-connection delivery position.
#[derive(Debug, Clone, Default)]
pub struct PushCursor {
    version: Option<u64>,
    recording: Option<bool>,
    done: bool,
}

impl PushCursor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set once the ended marker has been emitted; the stream then closes.
    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Messages that bring this connection up to `state`. A cloud message is
    /// emitted only for a higher version, so changes that do not advance the
    /// version (joins) ride along with the next versioned message. A
    /// connection that first sees an ended meeting gets only the ended marker.
    pub fn advance(&mut self, state: &PushState) -> Vec<PushMessage> {
        let mut out = Vec::new();
        if self.done {
            return out;
        }
        let fresh = self.version.is_none();
        if state.ended && fresh {
            self.done = true;
            return vec![PushMessage::Event { event: StreamEvent::Ended }];
        }
        let version = state.cloud.version;
        if self.version.is_none_or(|v| version > v) {
            self.version = Some(version);
            out.push(PushMessage::Cloud { version, cloud: (*state.cloud).clone() });
        }
        if self.recording != Some(state.cloud.recording) {
            self.recording = Some(state.cloud.recording);
            out.push(PushMessage::Recording { recording: state.cloud.recording });
        }
        if state.ended {
            self.done = true;
            out.push(PushMessage::Event { event: StreamEvent::Ended });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use meetcues_core::MeetingId;

    fn state(version: u64, recording: bool, ended: bool) -> PushState {
        let cloud = CloudState {
            meeting_id: MeetingId::new("m").unwrap(),
            version,
            at_ms: version * 10,
            emojis: Vec::new(),
            recording,
        };
        PushState { cloud: Arc::new(cloud), ended }
    }

    #[test]
    fn first_state_is_sent_in_full() {
        let mut cursor = PushCursor::new();
        let msgs = cursor.advance(&state(0, false, false));
        assert!(matches!(msgs[0], PushMessage::Cloud { version: 0, .. }));
        assert_eq!(msgs[1], PushMessage::Recording { recording: false });
    }

    #[test]
    fn versions_strictly_increase() {
        let mut cursor = PushCursor::new();
        cursor.advance(&state(3, false, false));
        assert!(cursor.advance(&state(3, false, false)).is_empty());
        assert!(cursor.advance(&state(2, false, false)).is_empty());
        assert_eq!(cursor.advance(&state(9, true, false)).len(), 2);
    }

    #[test]
    fn ended_meeting_gets_only_the_marker() {
        let mut cursor = PushCursor::new();
        let msgs = cursor.advance(&state(5, false, true));
        assert_eq!(msgs, vec![PushMessage::Event { event: StreamEvent::Ended }]);
        assert!(cursor.is_done());
        assert!(cursor.advance(&state(6, false, true)).is_empty());
    }

    #[test]
    fn live_connection_sees_final_state_then_ended() {
        let mut cursor = PushCursor::new();
        cursor.advance(&state(1, true, false));
        let msgs = cursor.advance(&state(4, false, true));
        assert!(matches!(msgs[0], PushMessage::Cloud { version: 4, .. }));
        assert_eq!(msgs[1], PushMessage::Recording { recording: false });
        assert_eq!(msgs[2], PushMessage::Event { event: StreamEvent::Ended });
    }

    #[test]
    fn wire_shapes() {
        let json = |m: &PushMessage| serde_json::to_string(m).unwrap();
        assert_eq!(json(&PushMessage::Recording { recording: true }), r#"{"recording":true}"#);
        assert_eq!(json(&PushMessage::Event { event: StreamEvent::Ended }), r#"{"event":"ended"}"#);
        let cloud = PushMessage::Cloud { version: 2, cloud: (*state(2, false, false).cloud).clone() };
        let text = json(&cloud);
        assert!(text.starts_with(r#"{"version":2,"cloud":{"#));
        assert_eq!(serde_json::from_str::<PushMessage>(&text).unwrap(), cloud);
    }
}
