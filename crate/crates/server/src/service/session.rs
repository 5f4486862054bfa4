use std::sync::Arc;

use meetcues_core::anon::{derive_attendee_id, validate_email};
use meetcues_core::{AttendeeId, Hashtag, JoinRecord, MeetingId, MeetingSession, MeetingState, MeetingView, Salt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{JobMode, MeetingHandle, Role, Runtime, Service, SummaryStatus};
use crate::error::{ServiceError, ServiceResult};

const HASHTAG_RETRIES: usize = 16;

/// Bearer credential issued on join.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub meeting_id: MeetingId,
    pub attendee: AttendeeId,
    pub issued_at: u64,
}

/// Response to meeting creation: the public meeting plus the host's token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedMeeting {
    #[serde(flatten)]
    pub meeting: MeetingView,
    pub host_token: String,
}

fn random_token(rng: &mut impl Rng) -> String {
    hex::encode(rng.random::<[u8; 16]>())
}

impl Service {
    /// Creates a meeting with a fresh hashtag and salt. `seed` makes the
    /// identifiers reproducible (simulation only).
    pub fn create_meeting(
        &self,
        host_id: &str,
        title: &str,
        recording_enabled: bool,
        now_ms: u64,
        seed: Option<u64>,
    ) -> ServiceResult<CreatedMeeting> {
        let mut seeded = seed.map(ChaCha8Rng::seed_from_u64);
        let mut thread = rand::rng();
        let rng: &mut dyn rand::RngCore = match seeded.as_mut() {
            Some(r) => r,
            None => &mut thread,
        };

        let _guard = self.shared.create_lock.lock();
        let meeting_id = MeetingId::from_bytes(rng.random());
        if self.shared.meetings.read().contains_key(&meeting_id) {
            return Err(ServiceError::Conflict("meeting id already exists".into()));
        }
        let hashtag = {
            let taken = self.shared.hashtags.read();
            (0..HASHTAG_RETRIES)
                .map(|_| Hashtag::from_draws(rng.random()))
                .find(|h| !taken.contains_key(h))
                .ok_or_else(|| ServiceError::Internal("could not allocate a unique hashtag".into()))?
        };
        let salt = Salt::from_bytes(rng.random());
        let session = MeetingSession::new(meeting_id.clone(), hashtag.clone(), title, host_id, recording_enabled, salt)?;
        let host_token = random_token(&mut rand::rng());

        self.shared.store.save_meeting(&session)?;
        self.store_grant(&host_token, &meeting_id, Role::Host, now_ms)?;
        let view = session.view();
        let handle = MeetingHandle::new(Runtime::rebuild(session, Vec::new(), Vec::new(), false), SummaryStatus::NotEnded);
        self.shared.hashtags.write().insert(hashtag, meeting_id.clone());
        self.shared.meetings.write().insert(meeting_id, Arc::new(handle));
        Ok(CreatedMeeting { meeting: view, host_token })
    }

    /// Joins by hashtag. The email is reduced to an [`AttendeeId`] and handed
    /// to the notifier; nothing else keeps it.
    pub fn join_meeting(&self, hashtag: &str, email: &str, now_ms: u64) -> ServiceResult<SessionToken> {
        let hashtag = Hashtag::new(hashtag).map_err(|_| ServiceError::NotFound("meeting"))?;
        let meeting_id = self.meeting_by_hashtag(&hashtag)?;
        validate_email(email)?;
        let handle = self.handle(&meeting_id)?;
        let attendee = {
            let mut rt = handle.runtime.lock();
            if rt.session.state() == MeetingState::Ended {
                return Err(ServiceError::Gone);
            }
            let attendee = derive_attendee_id(rt.session.salt(), email);
            if !rt.joined.contains(&attendee) {
                let join = JoinRecord { attendee, at_ms: rt.stamp(now_ms) };
                self.shared.store.append_join(&meeting_id, &join)?;
                rt.joined.insert(attendee);
                rt.joins.push(join);
                rt.last_ts = join.at_ms;
                rt.fold.join(&join);
                rt.fold.advance_to(join.at_ms);
                handle.publish(&rt);
            }
            attendee
        };
        self.shared.notifier.register(&meeting_id, email);
        let token = random_token(&mut rand::rng());
        self.store_grant(&token, &meeting_id, Role::Attendee(attendee), now_ms)?;
        Ok(SessionToken { token, meeting_id, attendee, issued_at: now_ms })
    }

    fn require_host(&self, token: Option<&str>, meeting: &MeetingId) -> ServiceResult<()> {
        match self.authorize(token, meeting)? {
            Role::Host => Ok(()),
            Role::Attendee(_) => Err(ServiceError::Forbidden("only the host may do this")),
        }
    }

    pub fn start_meeting(&self, token: Option<&str>, meeting: &MeetingId, now_ms: u64) -> ServiceResult<MeetingView> {
        self.require_host(token, meeting)?;
        let handle = self.handle(meeting)?;
        let mut rt = handle.runtime.lock();
        let started = rt.session.start(now_ms).map_err(|e| ServiceError::Conflict(e.to_string()))?;
        self.shared.store.save_meeting(&started)?;
        rt.session = started;
        handle.publish(&rt);
        Ok(rt.session.view())
    }

    /// Ends the meeting, stops the recording indicator and queues snippet
    /// extraction plus summary generation.
    pub fn end_meeting(&self, token: Option<&str>, meeting: &MeetingId, now_ms: u64) -> ServiceResult<MeetingView> {
        self.require_host(token, meeting)?;
        let handle = self.handle(meeting)?;
        let view = {
            let mut rt = handle.runtime.lock();
            let end_at = match rt.session.started_at() {
                Some(started) => now_ms.max(started + rt.last_ts),
                None => now_ms,
            };
            let ended = rt.session.end(end_at).map_err(|e| ServiceError::Conflict(e.to_string()))?;
            self.shared.store.save_meeting(&ended)?;
            let duration = ended.duration_ms().unwrap_or(0);
            rt.session = ended;
            rt.recording_active = false;
            rt.fold.advance_to(duration);
            *handle.summary.lock() = SummaryStatus::Pending;
            handle.publish(&rt);
            rt.session.view()
        };
        self.dispatch_finalize(meeting.clone());
        Ok(view)
    }

    pub(crate) fn dispatch_finalize(&self, meeting: MeetingId) {
        match self.shared.config.jobs {
            JobMode::Inline => {
                if let Err(e) = self.finalize(&meeting) {
                    tracing::error!(%meeting, error = %e, "finalize failed");
                }
            }
            JobMode::Background => {
                let service = self.clone();
                std::thread::spawn(move || {
                    if let Err(e) = service.finalize(&meeting) {
                        tracing::error!(%meeting, error = %e, "finalize failed");
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::{NullNotifier, ServiceConfig};
    use crate::store::MemoryStore;

    fn service() -> Service {
        let config = ServiceConfig { jobs: JobMode::Inline, ..Default::default() };
        Service::open(Arc::new(MemoryStore::new()), config, Arc::new(NullNotifier)).unwrap()
    }

    #[test]
    fn create_returns_created_state_with_fresh_hashtags() {
        let svc = service();
        let a = svc.create_meeting("h1", "Standup", true, 0, None).unwrap();
        let b = svc.create_meeting("h1", "Standup", true, 0, None).unwrap();
        assert_eq!(a.meeting.state, MeetingState::Created);
        assert!(a.meeting.recording_enabled);
        assert_ne!(a.meeting.hashtag, b.meeting.hashtag);
        assert_ne!(a.meeting.meeting_id, b.meeting.meeting_id);
        assert!(matches!(svc.create_meeting("h1", "", true, 0, None), Err(ServiceError::Validation(_))));
    }

    #[test]
    fn seeded_creation_is_reproducible() {
        let a = service().create_meeting("h", "T", false, 0, Some(7)).unwrap();
        let b = service().create_meeting("h", "T", false, 0, Some(7)).unwrap();
        assert_eq!(a.meeting, b.meeting);
        assert_ne!(a.host_token, b.host_token);
    }

    #[test]
    fn joins_are_deterministic_per_meeting() {
        let svc = service();
        let m1 = svc.create_meeting("h", "One", false, 0, None).unwrap().meeting;
        let m2 = svc.create_meeting("h", "Two", false, 0, None).unwrap().meeting;
        let t1 = svc.join_meeting(m1.hashtag.as_str(), "a@x.com", 5).unwrap();
        let t2 = svc.join_meeting(m1.hashtag.as_str(), " A@X.com", 6).unwrap();
        assert_ne!(t1.token, t2.token);
        assert_eq!(t1.attendee, t2.attendee);
        assert_eq!(svc.state(&m1.meeting_id, None).unwrap().emojis.len(), 1);
        let other = svc.join_meeting(m2.hashtag.as_str(), "a@x.com", 7).unwrap();
        assert_ne!(other.attendee, t1.attendee);
    }

    #[test]
    fn join_errors() {
        let svc = service();
        assert!(matches!(svc.join_meeting("zzzzzz", "a@x.com", 0), Err(ServiceError::NotFound(_))));
        assert!(matches!(svc.join_meeting("not-a-tag", "a@x.com", 0), Err(ServiceError::NotFound(_))));
        let created = svc.create_meeting("h", "T", false, 0, None).unwrap();
        let tag = created.meeting.hashtag.as_str();
        assert!(matches!(svc.join_meeting(tag, "nope", 0), Err(ServiceError::Validation(_))));
        let id = &created.meeting.meeting_id;
        svc.start_meeting(Some(&created.host_token), id, 10).unwrap();
        svc.end_meeting(Some(&created.host_token), id, 20).unwrap();
        assert!(matches!(svc.join_meeting(tag, "a@x.com", 30), Err(ServiceError::Gone)));
    }

    #[test]
    fn lifecycle_is_host_only_and_ordered() {
        let svc = service();
        let created = svc.create_meeting("h", "T", false, 0, None).unwrap();
        let id = &created.meeting.meeting_id;
        let host = Some(created.host_token.as_str());
        let attendee = svc.join_meeting(created.meeting.hashtag.as_str(), "a@x.com", 0).unwrap();
        assert!(matches!(svc.end_meeting(host, id, 1), Err(ServiceError::Conflict(_))));
        assert!(matches!(svc.start_meeting(Some(&attendee.token), id, 1), Err(ServiceError::Forbidden(_))));
        assert!(matches!(svc.start_meeting(None, id, 1), Err(ServiceError::Unauthorized)));
        assert!(matches!(svc.start_meeting(Some("bogus"), id, 1), Err(ServiceError::Unauthorized)));
        assert_eq!(svc.start_meeting(host, id, 100).unwrap().state, MeetingState::Live);
        assert!(matches!(svc.start_meeting(host, id, 101), Err(ServiceError::Conflict(_))));
        let ended = svc.end_meeting(host, id, 500).unwrap();
        assert_eq!((ended.state, ended.started_at, ended.ended_at), (MeetingState::Ended, Some(100), Some(500)));
        assert!(svc.summary_json(id).is_ok(), "inline jobs finish before end returns");
    }

    #[test]
    fn token_of_other_meeting_is_forbidden() {
        let svc = service();
        let a = svc.create_meeting("h", "A", false, 0, None).unwrap();
        let b = svc.create_meeting("h", "B", false, 0, None).unwrap();
        let r = svc.start_meeting(Some(&a.host_token), &b.meeting.meeting_id, 0);
        assert!(matches!(r, Err(ServiceError::Forbidden(_))));
    }
}
