//! Trace replay against an in-process service or a live server.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures::future::join_all;
use meetcues_core::wav::WavAudio;
use meetcues_core::{CloudState, CommentId, Event, MeetingId, Payload, ReactionKind, SnippetConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tokio::sync::mpsc::UnboundedSender;

use super::client::LiveClient;
use super::trace::{Action, AudioSource, Step, Trace, TraceLine};
use super::SimError;
use crate::error::ServiceError;
use crate::service::{JobMode, NullNotifier, Service, ServiceConfig, Submission};
use crate::store::{MemoryStore, Storage};

/// Where actions go.
#[derive(Clone)]
pub enum Target {
    /// Straight into a [`Service`]; post-meeting jobs should run inline.
    Offline(Service),
    Live(LiveClient),
}

impl Target {
    /// A fresh in-memory service with inline jobs.
    pub fn offline(snippets: SnippetConfig) -> Self {
        Self::offline_over(Arc::new(MemoryStore::new()), snippets)
    }

    pub fn offline_over(store: Arc<dyn Storage>, snippets: SnippetConfig) -> Self {
        let config = ServiceConfig { snippets, jobs: JobMode::Inline, ..Default::default() };
        let service = Service::open(store, config, Arc::new(NullNotifier)).expect("fresh store opens");
        Target::Offline(service)
    }

    pub fn live(url: &str) -> Self {
        Target::Live(LiveClient::new(url))
    }
}

impl From<ServiceError> for SimError {
    fn from(e: ServiceError) -> Self {
        SimError::Rejected { status: e.http_status(), code: e.code().to_owned(), message: e.to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Replay speed-up; infinite means no pacing.
    pub speed: f64,
    /// Seed for the meeting's identifiers, so repeated runs produce the same summary.
    pub seed: u64,
    pub title: String,
    /// Issue reactions that share a timestamp concurrently.
    pub parallel: bool,
    /// Base directory for relative audio paths.
    pub audio_dir: PathBuf,
    /// Receives [`Started`] once the meeting exists, before the first line runs.
    pub announce: Option<UnboundedSender<Started>>,
}

/// The replayed meeting, announced so observers can attach to it.
#[derive(Debug, Clone)]
pub struct Started {
    pub meeting_id: MeetingId,
    pub hashtag: String,
    pub host_token: String,
    /// Origin of every `acked_us` in the run report.
    pub clock: Instant,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            speed: f64::INFINITY,
            seed: 0,
            title: "Simulated meeting".into(),
            parallel: false,
            audio_dir: PathBuf::from("."),
            announce: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub index: usize,
    pub at_ms: u64,
    pub actor: String,
    pub action: Action,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_us: u64,
    /// When the acknowledgement arrived, from the start of the run.
    pub acked_us: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub meeting_id: MeetingId,
    pub hashtag: String,
    #[serde(skip)]
    pub host_token: String,
    pub outcomes: Vec<Outcome>,
    pub accepted: usize,
    pub rejected: usize,
    pub final_state: CloudState,
    /// SHA-256 of the final cloud JSON.
    pub state_digest: String,
    /// SHA-256 of `summary.json`, when the meeting ended.
    pub summary_digest: Option<String>,
    #[serde(skip)]
    pub summary: Option<Vec<u8>>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Context {
    target: Target,
    meeting: MeetingId,
    hashtag: String,
    host_token: String,
    tokens: HashMap<String, String>,
    labels: HashMap<String, CommentId>,
    audio_dir: PathBuf,
}

impl Context {
    fn token(&self, actor: &str) -> Result<String, SimError> {
        self.tokens.get(actor).cloned().ok_or_else(|| SimError::Script(format!("{actor} has not joined")))
    }

    async fn submit(&self, actor: &str, submission: Submission, now: u64) -> Result<Event, SimError> {
        let token = self.token(actor)?;
        match &self.target {
            Target::Offline(s) => Ok(s.submit(Some(&token), &self.meeting, submission, now)?.event),
            Target::Live(c) => c.submit(&self.meeting, &token, &submission, Some(now)).await,
        }
    }

    fn audio(&self, source: &AudioSource) -> Result<Vec<u8>, SimError> {
        match source {
            AudioSource::Path(p) => std::fs::read(self.audio_dir.join(p))
                .map_err(|e| SimError::Script(format!("cannot read audio {p}: {e}"))),
            AudioSource::Tone { rate, seconds } => {
                if *rate == 0 || !(*seconds >= 0.0) {
                    return Err(SimError::Script("tone needs a positive rate".into()));
                }
                Ok(WavAudio::tone(*rate, 1, *seconds, 440.0).encode())
            }
        }
    }

    /// Performs one step; returns the accepted event's seq, if any.
    async fn perform(&mut self, line: &TraceLine) -> Result<Option<u64>, SimError> {
        let now = line.at_ms;
        let step = line.step().map_err(SimError::Script)?;
        match step {
            Step::Join { email } => {
                let token = match &self.target {
                    Target::Offline(s) => s.join_meeting(&self.hashtag, &email, now)?.token,
                    Target::Live(c) => c.join(&self.hashtag, &email, Some(now)).await?.token,
                };
                self.tokens.insert(line.actor.clone(), token);
                Ok(None)
            }
            Step::Reaction { like } => {
                let kind = if like { ReactionKind::Like } else { ReactionKind::Clarify };
                Ok(Some(self.submit(&line.actor, Submission::Reaction { kind }, now).await?.seq()))
            }
            Step::Comment { text, label } => {
                let event = self.submit(&line.actor, Submission::Comment { text }, now).await?;
                if let (Some(label), Payload::Comment { comment_id, .. }) = (label, event.payload()) {
                    self.labels.insert(label, comment_id.clone());
                }
                Ok(Some(event.seq()))
            }
            Step::Upvote { label } => {
                let id = self.labels.get(&label).ok_or_else(|| SimError::Script(format!("unknown comment label {label}")))?;
                let submission = Submission::Upvote { comment_id: id.as_str().to_owned() };
                Ok(Some(self.submit(&line.actor, submission, now).await?.seq()))
            }
            Step::Start => {
                match &self.target {
                    Target::Offline(s) => drop(s.start_meeting(Some(&self.host_token), &self.meeting, now)?),
                    Target::Live(c) => drop(c.start(&self.meeting, &self.host_token, Some(now)).await?),
                }
                Ok(None)
            }
            Step::End => {
                match &self.target {
                    Target::Offline(s) => drop(s.end_meeting(Some(&self.host_token), &self.meeting, now)?),
                    Target::Live(c) => drop(c.end(&self.meeting, &self.host_token, Some(now)).await?),
                }
                Ok(None)
            }
            Step::UploadAudio { source, offset_ms } => {
                let wav = self.audio(&source)?;
                match &self.target {
                    Target::Offline(s) => s.ingest_recording(Some(&self.host_token), &self.meeting, &wav, offset_ms)?,
                    Target::Live(c) => c.upload(&self.meeting, &self.host_token, wav, offset_ms, Some(now)).await?,
                }
                Ok(None)
            }
        }
    }
}

fn outcome(
    index: usize,
    line: &TraceLine,
    result: Result<Option<u64>, SimError>,
    elapsed: Duration,
    acked: Duration,
) -> Outcome {
    let (ok, seq, status, error) = match result {
        Ok(seq) => (true, seq, None, None),
        Err(e) => (false, None, e.status(), Some(e.to_string())),
    };
    Outcome {
        index,
        at_ms: line.at_ms,
        actor: line.actor.clone(),
        action: line.action,
        ok,
        seq,
        status,
        error,
        elapsed_us: elapsed.as_micros() as u64,
        acked_us: acked.as_micros() as u64,
    }
}

/// Replays `trace`. The meeting is created first (stamped at the first
/// line's time) with recording enabled iff the trace uploads audio.
/// Rejected actions are recorded and the run continues.
pub async fn simulate(trace: &Trace, target: Target, options: &SimOptions) -> Result<RunReport, SimError> {
    let created_at = trace.lines.first().map_or(0, |l| l.at_ms);
    let host = trace.host();
    let created = match &target {
        Target::Offline(s) => s.create_meeting(host, &options.title, trace.has_audio(), created_at, Some(options.seed))?,
        Target::Live(c) => {
            c.create(host, &options.title, trace.has_audio(), Some(created_at), Some(options.seed)).await?
        }
    };
    let mut ctx = Context {
        target,
        meeting: created.meeting.meeting_id.clone(),
        hashtag: created.meeting.hashtag.as_str().to_owned(),
        host_token: created.host_token.clone(),
        tokens: HashMap::new(),
        labels: HashMap::new(),
        audio_dir: options.audio_dir.clone(),
    };

    let clock = Instant::now();
    if let Some(tx) = &options.announce {
        let _ = tx.send(Started {
            meeting_id: ctx.meeting.clone(),
            hashtag: ctx.hashtag.clone(),
            host_token: ctx.host_token.clone(),
            clock,
        });
    }
    let mut outcomes = Vec::with_capacity(trace.lines.len());
    let mut i = 0;
    while i < trace.lines.len() {
        let line = &trace.lines[i];
        if options.speed.is_finite() && options.speed > 0.0 {
            let due = Duration::from_secs_f64((line.at_ms - created_at) as f64 / 1000.0 / options.speed);
            if let Some(wait) = due.checked_sub(clock.elapsed()) {
                tokio::time::sleep(wait).await;
            }
        }
        let is_reaction = |l: &TraceLine| matches!(l.action, Action::Like | Action::Clarify);
        let group_end = if options.parallel && is_reaction(line) {
            i + trace.lines[i..].iter().take_while(|l| l.at_ms == line.at_ms && is_reaction(l)).count()
        } else {
            i + 1
        };
        if group_end - i > 1 {
            let ctx_ref = &ctx;
            let results = join_all(trace.lines[i..group_end].iter().map(|l| async move {
                let started = Instant::now();
                let token = ctx_ref.token(&l.actor);
                let kind = if l.action == Action::Like { ReactionKind::Like } else { ReactionKind::Clarify };
                let r = match token {
                    Ok(_) => ctx_ref.submit(&l.actor, Submission::Reaction { kind }, l.at_ms).await.map(|e| Some(e.seq())),
                    Err(e) => Err(e),
                };
                (r, started.elapsed(), clock.elapsed())
            }))
            .await;
            for (k, (r, elapsed, acked)) in results.into_iter().enumerate() {
                outcomes.push(outcome(i + k, &trace.lines[i + k], r, elapsed, acked));
            }
        } else {
            let started = Instant::now();
            let r = ctx.perform(line).await;
            outcomes.push(outcome(i, line, r, started.elapsed(), clock.elapsed()));
        }
        i = group_end;
    }

    let (final_state, summary) = match &ctx.target {
        Target::Offline(s) => {
            let state = s.state(&ctx.meeting, None)?;
            let summary = match s.summary_json(&ctx.meeting) {
                Ok(json) => Some(json.to_vec()),
                Err(ServiceError::Pending) => None,
                Err(e) => return Err(e.into()),
            };
            (state, summary)
        }
        Target::Live(c) => {
            let state = c.state(&ctx.meeting, &ctx.host_token, None).await?;
            let ended = trace.lines.iter().zip(&outcomes).any(|(l, o)| l.action == Action::End && o.ok);
            let summary = if ended { Some(c.wait_summary(&ctx.meeting, &ctx.host_token).await?) } else { None };
            (state, summary)
        }
    };
    let state_json = serde_json::to_vec(&final_state).map_err(|e| SimError::Transport(e.to_string()))?;
    let accepted = outcomes.iter().filter(|o| o.ok).count();
    Ok(RunReport {
        meeting_id: ctx.meeting,
        hashtag: ctx.hashtag,
        host_token: ctx.host_token,
        rejected: outcomes.len() - accepted,
        accepted,
        outcomes,
        state_digest: digest(&state_json),
        final_state,
        summary_digest: summary.as_deref().map(digest),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate::{generate, GenerateConfig};
    use serde_json::json;

    fn run(trace: &Trace) -> RunReport {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(simulate(trace, Target::offline(SnippetConfig::default()), &SimOptions::default())).unwrap()
    }

    #[test]
    fn start_end_only_gives_an_empty_summary() {
        let trace = Trace {
            lines: vec![
                TraceLine::new(0, "h", Action::Start, json!(null)),
                TraceLine::new(60_000, "h", Action::End, json!(null)),
            ],
        };
        let report = run(&trace);
        let summary: meetcues_core::SummaryReport = serde_json::from_slice(report.summary.as_ref().unwrap()).unwrap();
        assert_eq!(summary.attendee_count, 0);
        assert!(summary.snippets.is_empty() && summary.comments_chrono.is_empty());
        assert_eq!(summary.timeline.len(), 1);
    }

    #[test]
    fn offline_replay_is_deterministic() {
        let config = GenerateConfig {
            attendees: 55,
            duration_s: 600.0,
            bursts: vec!["60:300:50".parse().unwrap()],
            seed: 3,
            audio_rate: Some(100),
        };
        let trace = generate(&config).unwrap();
        let (a, b) = (run(&trace), run(&trace));
        assert_eq!(a.final_state.emojis.len(), 55);
        assert_eq!(a.rejected, 0);
        assert_eq!(a.state_digest, b.state_digest);
        assert_eq!(a.summary, b.summary);
        assert!(a.summary_digest.is_some());
    }

    #[test]
    fn rejections_are_recorded_and_the_run_continues() {
        let trace = Trace {
            lines: vec![
                TraceLine::new(0, "a", Action::Join, json!(null)),
                TraceLine::new(1, "a", Action::Like, json!(null)),
                TraceLine::new(2, "h", Action::Start, json!(null)),
                TraceLine::new(3, "b", Action::Like, json!(null)),
                TraceLine::new(4, "a", Action::Like, json!(null)),
            ],
        };
        let report = run(&trace);
        let ok: Vec<bool> = report.outcomes.iter().map(|o| o.ok).collect();
        assert_eq!(ok, vec![true, false, true, false, true]);
        assert_eq!(report.outcomes[1].status, Some(409));
        assert_eq!(report.outcomes[4].seq, Some(1));
        assert!(report.summary.is_none());
    }
}
