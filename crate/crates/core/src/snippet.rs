//! Engagement-driven audio partitioning: slice, normalize, threshold, merge
//! adjacent qualifying slices, cut.

use thiserror::Error;

use crate::domain::{AudioSnippet, Event, MeetingSession, MeetingState, SnippetConfig, TimelineBucket};
use crate::timeline::timeline;
use crate::wav::{WavAudio, WavError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnippetError {
    #[error("meeting has not ended")]
    NotEnded,
    #[error("recording could not be decoded: {0}")]
    Decode(#[from] WavError),
}

/// Half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

/// `mask[i] = norm[i] >= threshold`.
pub fn select_buckets(timeline: &[TimelineBucket], threshold: f64) -> Vec<bool> {
    timeline.iter().map(|b| b.norm >= threshold).collect()
}

/// Maximal runs of `true` as `[start, end)` bucket-index ranges.
pub fn runs(mask: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &on) in mask.iter().chain(std::iter::once(&false)).enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Merges runs of qualifying buckets into padded intervals clamped to
/// `[0, duration_s]`. Intervals whose padding makes them touch or overlap
/// are merged so the result stays disjoint and sorted.
pub fn merge_runs(mask: &[bool], bucket_s: u32, pad_s: u32, duration_s: f64) -> Vec<Interval> {
    let width = f64::from(bucket_s);
    let pad = f64::from(pad_s);
    let mut out: Vec<Interval> = Vec::new();
    for run in runs(mask) {
        let start_s = (run.start as f64 * width - pad).max(0.0);
        let end_s = (run.end as f64 * width + pad).min(duration_s);
        if end_s <= start_s {
            continue;
        }
        match out.last_mut() {
            Some(prev) if prev.end_s >= start_s => prev.end_s = prev.end_s.max(end_s),
            _ => out.push(Interval { start_s, end_s }),
        }
    }
    out
}

/// A planned snippet before any audio is cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedSnippet {
    pub interval: Interval,
    pub peak_norm: f64,
}

/// Runs timeline -> select -> merge and attaches the peak norm under each interval.
pub fn plan_snippets(timeline: &[TimelineBucket], config: &SnippetConfig, duration_s: f64) -> Vec<PlannedSnippet> {
    let mask = select_buckets(timeline, config.threshold());
    let intervals = merge_runs(&mask, config.bucket_s(), config.pad_s(), duration_s);
    let width = f64::from(config.bucket_s());
    intervals
        .into_iter()
        .map(|interval| {
            let peak_norm = timeline
                .iter()
                .zip(&mask)
                .filter(|(b, &on)| {
                    let (s, e) = (b.index as f64 * width, (b.index + 1) as f64 * width);
                    on && s < interval.end_s && e > interval.start_s
                })
                .map(|(b, _)| b.norm)
                .fold(0.0, f64::max);
            PlannedSnippet { interval, peak_norm }
        })
        .collect()
}

/// Stored recording plus where it sits on the meeting clock.
#[derive(Debug, Clone, Copy)]
pub struct Recording<'a> {
    pub wav: &'a [u8],
    /// Meeting-relative time at which the first audio frame was captured.
    pub offset_ms: u64,
}

/// An extracted snippet with its audio.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSnippet {
    pub snippet: AudioSnippet,
    pub audio: WavAudio,
}

/// `<meeting_id>/snippets/<index>_<start_s>-<end_s>.wav`, relative to the data directory.
pub fn snippet_path(meeting_id: &str, index: usize, start_s: f64, end_s: f64) -> String {
    format!("{meeting_id}/snippets/{index}_{start_s}-{end_s}.wav")
}

/// The full post-meeting pipeline for one meeting. Returns no snippets when
/// recording is disabled or absent. Intervals that fall entirely outside the
/// captured audio are dropped.
pub fn extract_snippets(
    events: &[Event],
    recording: Option<Recording<'_>>,
    session: &MeetingSession,
    config: &SnippetConfig,
) -> Result<Vec<ExtractedSnippet>, SnippetError> {
    if session.state() != MeetingState::Ended {
        return Err(SnippetError::NotEnded);
    }
    let recording = match recording {
        Some(r) if session.recording_enabled() => r,
        _ => return Ok(Vec::new()),
    };
    let audio = WavAudio::decode(recording.wav)?;
    let duration_ms = session.duration_ms().unwrap_or(0);
    let buckets = timeline(events, duration_ms, config);
    let offset_s = recording.offset_ms as f64 / 1000.0;
    let mut out = Vec::new();
    for planned in plan_snippets(&buckets, config, duration_ms as f64 / 1000.0) {
        let Interval { start_s, end_s } = planned.interval;
        let clip = audio.cut(start_s - offset_s, end_s - offset_s);
        if clip.frames() == 0 {
            continue;
        }
        let index = out.len();
        out.push(ExtractedSnippet {
            snippet: AudioSnippet {
                meeting_id: session.meeting_id().clone(),
                start_s,
                end_s,
                path: snippet_path(session.meeting_id().as_str(), index, start_s, end_s),
                peak_norm: planned.peak_norm,
            },
            audio: clip,
        });
    }
    Ok(out)
}
