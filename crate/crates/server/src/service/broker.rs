//! Recording ingestion and the post-meeting pipeline.

use std::sync::Arc;

use meetcues_core::report::build_report;
use meetcues_core::snippet::{extract_snippets, Recording, SnippetError};
use meetcues_core::wav::WavAudio;
use meetcues_core::{MeetingId, MeetingState, SummaryReport};

use super::{MeetingHandle, Role, Service, SummaryStatus};
use crate::error::{ServiceError, ServiceResult};
use crate::store::RecordingMeta;

impl Service {
    fn recording_target(&self, token: Option<&str>, meeting: &MeetingId) -> ServiceResult<Arc<MeetingHandle>> {
        if self.authorize(token, meeting)? != Role::Host {
            return Err(ServiceError::Forbidden("only the host may upload recordings"));
        }
        let handle = self.handle(meeting)?;
        let rt = handle.runtime.lock();
        if !rt.session.recording_enabled() {
            return Err(ServiceError::Forbidden("recording is disabled for this meeting"));
        }
        if rt.session.state() == MeetingState::Ended {
            return Err(ServiceError::Conflict("meeting has ended".into()));
        }
        drop(rt);
        Ok(handle)
    }

    /// Marks an upload as in progress and raises the recording indicator.
    pub fn begin_recording(&self, token: Option<&str>, meeting: &MeetingId) -> ServiceResult<()> {
        let handle = self.recording_target(token, meeting)?;
        let mut rt = handle.runtime.lock();
        if !rt.recording_active {
            rt.recording_active = true;
            handle.publish(&rt);
        }
        Ok(())
    }

    /// Validates and stores an uploaded recording, replacing any earlier one.
    /// The indicator stays up while a recording exists and the meeting runs;
    /// a rejected upload restores it to what it was before.
    pub fn finish_recording(
        &self,
        token: Option<&str>,
        meeting: &MeetingId,
        wav: &[u8],
        offset_ms: u64,
    ) -> ServiceResult<()> {
        let handle = self.recording_target(token, meeting)?;
        let _serial = handle.generation.lock();
        let stored = (|| {
            WavAudio::decode(wav)?;
            if handle.runtime.lock().session.state() == MeetingState::Ended {
                return Err(ServiceError::Conflict("meeting has ended".into()));
            }
            self.shared.store.write_recording(meeting, wav, RecordingMeta { offset_ms })?;
            Ok(())
        })();
        let had_recording = stored.is_ok() || self.shared.store.read_recording(meeting)?.is_some();
        let mut rt = handle.runtime.lock();
        let active = had_recording && rt.session.state() != MeetingState::Ended;
        if rt.recording_active != active {
            rt.recording_active = active;
            handle.publish(&rt);
        }
        stored
    }

    pub fn ingest_recording(
        &self,
        token: Option<&str>,
        meeting: &MeetingId,
        wav: &[u8],
        offset_ms: u64,
    ) -> ServiceResult<()> {
        self.begin_recording(token, meeting)?;
        self.finish_recording(token, meeting, wav, offset_ms)
    }

    /// Cuts snippets, writes them and the summary, then notifies attendees
    /// once. Safe to repeat: snippet files are replaced and the summary is a
    /// pure function of log, recording and config.
    pub fn finalize(&self, meeting: &MeetingId) -> ServiceResult<Arc<SummaryReport>> {
        let handle = self.handle(meeting)?;
        let _serial = handle.generation.lock();
        let (session, events, joins) = {
            let rt = handle.runtime.lock();
            (rt.session.clone(), rt.events.clone(), rt.joins.clone())
        };
        if session.state() != MeetingState::Ended {
            return Err(ServiceError::Conflict("meeting has not ended".into()));
        }
        let config = &self.shared.config.snippets;
        let stored = self.shared.store.read_recording(meeting)?;
        let recording = stored.as_ref().map(|(wav, meta)| Recording { wav, offset_ms: meta.offset_ms });
        let mut warnings = Vec::new();
        let extracted = match extract_snippets(&events, recording, &session, config) {
            Ok(x) => x,
            Err(SnippetError::Decode(e)) => {
                tracing::warn!(%meeting, error = %e, "recording unreadable; summary has no snippets");
                warnings.push(format!("recording could not be decoded: {e}"));
                Vec::new()
            }
            Err(e) => return Err(e.into()),
        };
        let files: Vec<(String, Vec<u8>)> =
            extracted.iter().map(|x| (x.snippet.path.clone(), x.audio.encode())).collect();
        self.shared.store.write_snippets(meeting, &files)?;
        let snippets = extracted.into_iter().map(|x| x.snippet).collect();
        let report = build_report(&session, &events, &joins, snippets, warnings, config);
        let json = serde_json::to_vec(&report).map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.shared.store.write_summary(meeting, &json)?;
        let report = Arc::new(report);
        *handle.summary.lock() = SummaryStatus::Ready { json: Arc::new(json), report: report.clone() };

        let mut notified = handle.notified.lock();
        if !*notified {
            *notified = true;
            let link = format!("{}/summary/{}", self.shared.config.public_url.trim_end_matches('/'), meeting);
            let records = self.shared.notifier.notify(meeting, session.title(), &link);
            let failed = records.iter().filter(|r| !r.delivered()).count();
            tracing::info!(%meeting, sent = records.len() - failed, failed, "summary notifications");
        }
        Ok(report)
    }
}
