//! Meeting services: lifecycle and join, event ingest, recording broker and
//! summaries, all over one [`Storage`].
//!
//! Every meeting has a single runtime behind a mutex. Accepting an event
//! (validate, assign seq, append, fold, publish) happens entirely under that
//! lock, so the log order is the acceptance order. Live state is published
//! through a `watch` channel; subscribers never hold the lock.

mod broker;
mod ingest;
pub mod notify;
pub mod push;
mod session;
mod summary;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use meetcues_core::comments::CommentBoard;
use meetcues_core::mood::CloudFold;
use meetcues_core::{
    AttendeeId, CloudState, Event, Hashtag, JoinRecord, MeetingId, MeetingSession, MeetingState, SnippetConfig,
    SummaryReport,
};
use parking_lot::{Mutex, RwLock};
use sha2::{Digest, Sha256};
use tokio::sync::watch;

use crate::error::{ServiceError, ServiceResult};
use crate::store::{GrantRecord, Storage};

pub use ingest::{Submission, Submitted};
pub use notify::{Deliver, DeliveryRecord, FileOutbox, MailNotifier, Notifier, NullNotifier};
pub use push::{PushCursor, PushMessage, PushState, StreamEvent};
pub use session::{CreatedMeeting, SessionToken};
pub use summary::render_html;

/// Where post-meeting work runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JobMode {
    /// On a worker thread; `end_meeting` returns immediately.
    #[default]
    Background,
    /// Inside `end_meeting`, before it returns.
    Inline,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub snippets: SnippetConfig,
    pub jobs: JobMode,
    /// Base URL placed in summary notifications.
    pub public_url: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { snippets: SnippetConfig::default(), jobs: JobMode::Background, public_url: "http://localhost:8080".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Host,
    Attendee(AttendeeId),
}

#[derive(Debug, Clone)]
pub(crate) struct Grant {
    meeting_id: MeetingId,
    role: Role,
}

#[derive(Debug, Clone)]
pub(crate) enum SummaryStatus {
    NotEnded,
    Pending,
    Ready { json: Arc<Vec<u8>>, report: Arc<SummaryReport> },
}

pub(crate) struct Runtime {
    session: MeetingSession,
    events: Vec<Event>,
    joins: Vec<JoinRecord>,
    joined: HashSet<AttendeeId>,
    fold: CloudFold,
    board: CommentBoard,
    recording_active: bool,
    /// Latest meeting-relative activity time; stamps never go below it.
    last_ts: u64,
}

impl Runtime {
    fn rebuild(session: MeetingSession, events: Vec<Event>, joins: Vec<JoinRecord>, recording_active: bool) -> Self {
        let last_ts = events
            .last()
            .map_or(0, Event::ts_ms)
            .max(joins.last().map_or(0, |j| j.at_ms));
        let horizon = session.duration_ms().unwrap_or(last_ts).max(last_ts);
        let mut fold = CloudFold::new(session.meeting_id().clone());
        fold.fold_window(&events, &joins, None, horizon);
        Self {
            joined: joins.iter().map(|j| j.attendee).collect(),
            board: CommentBoard::from_events(&events),
            recording_active: recording_active && session.state() != MeetingState::Ended,
            session,
            events,
            joins,
            fold,
            last_ts,
        }
    }

    fn push_state(&self) -> PushState {
        PushState {
            cloud: Arc::new(self.fold.snapshot(self.recording_active)),
            ended: self.session.state() == MeetingState::Ended,
        }
    }

    /// Meeting-relative stamp for an action at `now_ms`, clamped to keep
    /// stamps non-decreasing.
    fn stamp(&self, now_ms: u64) -> u64 {
        self.session.relative_ms(now_ms).max(self.last_ts)
    }
}

pub(crate) struct MeetingHandle {
    runtime: Mutex<Runtime>,
    push: watch::Sender<PushState>,
    summary: Mutex<SummaryStatus>,
    generation: Mutex<()>,
    notified: Mutex<bool>,
}

impl MeetingHandle {
    fn new(runtime: Runtime, summary: SummaryStatus) -> Self {
        let (push, _) = watch::channel(runtime.push_state());
        Self {
            runtime: Mutex::new(runtime),
            push,
            summary: Mutex::new(summary),
            generation: Mutex::new(()),
            notified: Mutex::new(false),
        }
    }

    fn publish(&self, runtime: &Runtime) {
        self.push.send_replace(runtime.push_state());
    }
}

pub(crate) struct Shared {
    store: Arc<dyn Storage>,
    config: ServiceConfig,
    notifier: Arc<dyn Notifier>,
    meetings: RwLock<HashMap<MeetingId, Arc<MeetingHandle>>>,
    hashtags: RwLock<HashMap<Hashtag, MeetingId>>,
    grants: RwLock<HashMap<String, Grant>>,
    create_lock: Mutex<()>,
}

/// Cheaply cloneable handle to the meeting services.
#[derive(Clone)]
pub struct Service {
    shared: Arc<Shared>,
}

pub(crate) fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

impl Service {
    /// Opens the services over `store`, rebuilding every meeting from its
    /// log. Ended meetings without a stored summary are finalized again.
    pub fn open(store: Arc<dyn Storage>, config: ServiceConfig, notifier: Arc<dyn Notifier>) -> ServiceResult<Self> {
        let mut meetings = HashMap::new();
        let mut hashtags = HashMap::new();
        let mut unfinished = Vec::new();
        for session in store.load_meetings()? {
            let id = session.meeting_id().clone();
            let replay = store.replay(&id)?;
            if replay.torn_tail {
                tracing::warn!(meeting = %id, "recovered log had a torn final line");
            }
            let joins = store.load_joins(&id)?;
            let has_recording = store.read_recording(&id)?.is_some();
            let summary = match (session.state(), store.read_summary(&id)?) {
                (MeetingState::Ended, Some(json)) => {
                    let report: SummaryReport = serde_json::from_slice(&json)
                        .map_err(|e| ServiceError::Internal(format!("stored summary for {id}: {e}")))?;
                    SummaryStatus::Ready { json: Arc::new(json), report: Arc::new(report) }
                }
                (MeetingState::Ended, None) => {
                    unfinished.push(id.clone());
                    SummaryStatus::Pending
                }
                _ => SummaryStatus::NotEnded,
            };
            hashtags.insert(session.hashtag().clone(), id.clone());
            let runtime = Runtime::rebuild(session, replay.events, joins, has_recording);
            meetings.insert(id, Arc::new(MeetingHandle::new(runtime, summary)));
        }
        let grants = store
            .load_grants()?
            .into_iter()
            .map(|g| {
                let role = g.attendee.map_or(Role::Host, Role::Attendee);
                (g.token_sha256, Grant { meeting_id: g.meeting_id, role })
            })
            .collect();
        let service = Service {
            shared: Arc::new(Shared {
                store,
                config,
                notifier,
                meetings: RwLock::new(meetings),
                hashtags: RwLock::new(hashtags),
                grants: RwLock::new(grants),
                create_lock: Mutex::new(()),
            }),
        };
        for id in unfinished {
            service.dispatch_finalize(id);
        }
        Ok(service)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.shared.config
    }

    pub fn store(&self) -> &Arc<dyn Storage> {
        &self.shared.store
    }

    pub(crate) fn handle(&self, meeting: &MeetingId) -> ServiceResult<Arc<MeetingHandle>> {
        self.shared.meetings.read().get(meeting).cloned().ok_or(ServiceError::NotFound("meeting"))
    }

    /// Resolves a bearer token for `meeting`. An unknown meeting is reported
    /// before a token that does not fit it.
    pub fn authorize(&self, token: Option<&str>, meeting: &MeetingId) -> ServiceResult<Role> {
        let token = token.ok_or(ServiceError::Unauthorized)?;
        self.handle(meeting)?;
        let grant = self.shared.grants.read().get(&token_digest(token)).cloned().ok_or(ServiceError::Unauthorized)?;
        if &grant.meeting_id != meeting {
            return Err(ServiceError::Forbidden("token belongs to another meeting"));
        }
        Ok(grant.role)
    }

    fn store_grant(&self, token: &str, meeting: &MeetingId, role: Role, issued_at: u64) -> ServiceResult<()> {
        let digest = token_digest(token);
        let attendee = match role {
            Role::Host => None,
            Role::Attendee(a) => Some(a),
        };
        self.shared.store.save_grant(&GrantRecord {
            token_sha256: digest.clone(),
            meeting_id: meeting.clone(),
            attendee,
            issued_at,
        })?;
        self.shared.grants.write().insert(digest, Grant { meeting_id: meeting.clone(), role });
        Ok(())
    }

    pub fn session(&self, meeting: &MeetingId) -> ServiceResult<MeetingSession> {
        Ok(self.handle(meeting)?.runtime.lock().session.clone())
    }

    pub fn meeting_by_hashtag(&self, hashtag: &Hashtag) -> ServiceResult<MeetingId> {
        self.shared.hashtags.read().get(hashtag).cloned().ok_or(ServiceError::NotFound("meeting"))
    }

    pub fn meeting_ids(&self) -> Vec<MeetingId> {
        self.shared.meetings.read().keys().cloned().collect()
    }

    /// Accepted events so far, in seq order.
    pub fn events(&self, meeting: &MeetingId) -> ServiceResult<Vec<Event>> {
        Ok(self.handle(meeting)?.runtime.lock().events.clone())
    }

    pub fn joins(&self, meeting: &MeetingId) -> ServiceResult<Vec<JoinRecord>> {
        Ok(self.handle(meeting)?.runtime.lock().joins.clone())
    }

    /// Live cloud (latest published state) or the cloud as of `at_ms`.
    pub fn state(&self, meeting: &MeetingId, at_ms: Option<u64>) -> ServiceResult<CloudState> {
        let handle = self.handle(meeting)?;
        match at_ms {
            None => Ok((*handle.push.borrow().cloud).clone()),
            Some(at) => {
                let rt = handle.runtime.lock();
                Ok(meetcues_core::mood::cloud_at(meeting, &rt.events, &rt.joins, at, rt.recording_active))
            }
        }
    }

    pub fn subscribe(&self, meeting: &MeetingId) -> ServiceResult<watch::Receiver<PushState>> {
        Ok(self.handle(meeting)?.push.subscribe())
    }
}
