//! Assembly of the post-meeting summary from the log and extracted snippets.

use crate::comments::CommentBoard;
use crate::domain::{
    AudioSnippet, CommentOrder, Event, JoinRecord, MeetingSession, SnippetConfig, SummaryReport,
};
use crate::mood::cloud_at;
use crate::timeline::timeline;

/// Builds the report for an ended meeting. The final cloud is folded at the
/// meeting's end instant with the recording indicator off.
pub fn build_report(
    session: &MeetingSession,
    events: &[Event],
    joins: &[JoinRecord],
    snippets: Vec<AudioSnippet>,
    warnings: Vec<String>,
    config: &SnippetConfig,
) -> SummaryReport {
    let duration_ms = session.duration_ms().unwrap_or(0);
    let cloud = cloud_at(session.meeting_id(), events, joins, duration_ms, false);
    let board = CommentBoard::from_events(events);
    SummaryReport {
        meeting: session.view(),
        attendee_count: cloud.emojis.len() as u64,
        cloud,
        timeline: timeline(events, duration_ms, config),
        snippets,
        comments_chrono: board.list(CommentOrder::Chrono),
        comments_popular: board.list(CommentOrder::Popularity),
        warnings,
    }
}
