use meetcues_core::timeline::timeline;
use meetcues_core::{
    CommentEntry, CommentId, CommentOrder, CommentText, Event, MeetingId, MeetingState, Payload, ReactionKind,
    TimelineBucket,
};
use serde::{Deserialize, Serialize};

use super::{Role, Service};
use crate::error::{ServiceError, ServiceResult};

/// Body of an event submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Submission {
    Reaction { kind: ReactionKind },
    Comment { text: String },
    Upvote { comment_id: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submitted {
    pub event: Event,
    /// False for a repeated upvote, where `event` is the original one.
    pub created: bool,
}

impl Service {
    /// Validates, sequences, stamps and appends one event. The event is in
    /// the log before this returns and the new cloud is published.
    pub fn submit(
        &self,
        token: Option<&str>,
        meeting: &MeetingId,
        submission: Submission,
        now_ms: u64,
    ) -> ServiceResult<Submitted> {
        let attendee = match self.authorize(token, meeting)? {
            Role::Attendee(a) => a,
            Role::Host => return Err(ServiceError::Forbidden("join the meeting to submit events")),
        };
        let handle = self.handle(meeting)?;
        let mut rt = handle.runtime.lock();
        if rt.session.state() != MeetingState::Live {
            return Err(ServiceError::Conflict(format!("meeting is {}", rt.session.state().as_str())));
        }
        let seq = rt.events.len() as u64 + 1;
        let payload = match submission {
            Submission::Reaction { kind } => Payload::Reaction { kind },
            Submission::Comment { text } => {
                Payload::Comment { comment_id: CommentId::for_seq(seq), text: CommentText::new(text)? }
            }
            Submission::Upvote { comment_id } => {
                let comment_id = CommentId::new(comment_id).map_err(|_| ServiceError::NotFound("comment"))?;
                if !rt.board.contains(&comment_id) {
                    return Err(ServiceError::NotFound("comment"));
                }
                if let Some(prior) = rt.board.existing_vote(&comment_id, attendee) {
                    return Ok(Submitted { event: rt.events[prior as usize - 1].clone(), created: false });
                }
                Payload::Upvote { comment_id }
            }
        };
        let ts = rt.stamp(now_ms);
        let event = Event::new(seq, ts, attendee, payload)?;
        self.shared.store.append(meeting, &event)?;
        rt.board.apply(&event);
        rt.fold.apply(&event);
        rt.fold.advance_to(ts);
        rt.last_ts = ts;
        rt.events.push(event.clone());
        handle.publish(&rt);
        Ok(Submitted { event, created: true })
    }

    pub fn list_comments(&self, meeting: &MeetingId, order: CommentOrder) -> ServiceResult<Vec<CommentEntry>> {
        Ok(self.handle(meeting)?.runtime.lock().board.list(order))
    }

    /// Timeline over the whole meeting once ended. While live it runs through
    /// the instant `now_ms`, so the current partial bucket is included.
    pub fn timeline(&self, meeting: &MeetingId, now_ms: u64) -> ServiceResult<Vec<TimelineBucket>> {
        let handle = self.handle(meeting)?;
        let rt = handle.runtime.lock();
        let duration = rt.session.duration_ms().unwrap_or_else(|| rt.stamp(now_ms) + 1);
        Ok(timeline(&rt.events, duration, &self.shared.config.snippets))
    }
}
