//! Emoji encoding of per-attendee reaction balance, and the room cloud
//! folded from the event log at any time horizon.

use std::collections::HashMap;

use crate::domain::{
    AttendeeId, CloudState, EmojiState, Event, Expression, JoinRecord, MeetingId, Payload,
    ReactionKind, Rgb,
};
use crate::error::{Result, ValidationError};

pub const YELLOW: Rgb = Rgb(244, 194, 13);
pub const GRAY: Rgb = Rgb(200, 200, 200);
pub const TEAL: Rgb = Rgb(0, 163, 155);
pub const EXPRESSION_BAND: f64 = 0.15;
pub const MAX_SIZE_SCALE: f64 = 2.5;

/// `(likes - clarifies) / max(1, likes + clarifies)`.
pub fn mood_score(likes: u64, clarifies: u64) -> f64 {
    let diff = i128::from(likes) - i128::from(clarifies);
    let total = (u128::from(likes) + u128::from(clarifies)).max(1);
    diff as f64 / total as f64
}

/// Piecewise-linear ramp yellow (-1) -> gray (0) -> teal (+1).
pub fn color_of(mood: f64) -> Result<Rgb> {
    if !(-1.0..=1.0).contains(&mood) {
        return Err(ValidationError::MoodRange(mood));
    }
    // anchored at gray so t = |mood| carries no cancellation error
    let (from, to, t) = if mood < 0.0 { (GRAY, YELLOW, -mood) } else { (GRAY, TEAL, mood) };
    let lerp = |a: u8, b: u8| {
        let v = f64::from(a) + (f64::from(b) - f64::from(a)) * t;
        // f64::round is half-away-from-zero
        v.round().clamp(0.0, 255.0) as u8
    };
    Ok(Rgb(lerp(from.0, to.0), lerp(from.1, to.1), lerp(from.2, to.2)))
}

pub fn expression_of(mood: f64) -> Expression {
    if mood > EXPRESSION_BAND {
        Expression::Happy
    } else if mood < -EXPRESSION_BAND {
        Expression::Thinking
    } else {
        Expression::Neutral
    }
}

/// `min(2.5, 1 + log2(1 + comments) / 2)`.
pub fn size_scale(comments: u64) -> f64 {
    (1.0 + (1.0 + comments as f64).log2() / 2.0).min(MAX_SIZE_SCALE)
}

pub fn emoji_state(attendee: AttendeeId, likes: u64, clarifies: u64, comments: u64) -> EmojiState {
    let mood = mood_score(likes, clarifies);
    EmojiState {
        attendee,
        like_count: likes,
        clarify_count: clarifies,
        comment_count: comments,
        mood,
        color: color_of(mood).expect("mood_score stays within [-1, 1]"),
        size_scale: size_scale(comments),
        expression: expression_of(mood),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    likes: u64,
    clarifies: u64,
    comments: u64,
}

/// Incremental fold of joins and events into a [`CloudState`].
///
/// Joins and events must be fed in time order (a join sorts before an event
/// with the same timestamp). Folding everything up to `t2` in one pass or up
/// to `t1` and then the remainder yields identical clouds.
#[derive(Debug, Clone)]
pub struct CloudFold {
    meeting_id: MeetingId,
    order: Vec<AttendeeId>,
    counts: HashMap<AttendeeId, Counts>,
    version: u64,
    at_ms: u64,
}

impl CloudFold {
    pub fn new(meeting_id: MeetingId) -> Self {
        Self { meeting_id, order: Vec::new(), counts: HashMap::new(), version: 0, at_ms: 0 }
    }

    /// Resumes folding from a previously produced cloud.
    pub fn from_state(state: &CloudState) -> Self {
        let order = state.emojis.iter().map(|e| e.attendee).collect();
        let counts = state
            .emojis
            .iter()
            .map(|e| {
                let c = Counts { likes: e.like_count, clarifies: e.clarify_count, comments: e.comment_count };
                (e.attendee, c)
            })
            .collect();
        Self {
            meeting_id: state.meeting_id.clone(),
            order,
            counts,
            version: state.version,
            at_ms: state.at_ms,
        }
    }

    fn entry(&mut self, attendee: AttendeeId) -> &mut Counts {
        if !self.counts.contains_key(&attendee) {
            self.order.push(attendee);
        }
        self.counts.entry(attendee).or_default()
    }

    /// Adds a joined attendee; repeat joins are no-ops.
    pub fn join(&mut self, join: &JoinRecord) {
        self.entry(join.attendee);
    }

    pub fn apply(&mut self, event: &Event) {
        let counts = self.entry(event.attendee());
        match event.payload() {
            Payload::Reaction { kind: ReactionKind::Like } => counts.likes += 1,
            Payload::Reaction { kind: ReactionKind::Clarify } => counts.clarifies += 1,
            Payload::Comment { .. } => counts.comments += 1,
            Payload::Upvote { .. } => {}
        }
        self.version = event.seq();
    }

    /// Moves the horizon forward; never backward.
    pub fn advance_to(&mut self, at_ms: u64) {
        self.at_ms = self.at_ms.max(at_ms);
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn attendee_count(&self) -> usize {
        self.order.len()
    }

    pub fn snapshot(&self, recording: bool) -> CloudState {
        let emojis = self
            .order
            .iter()
            .map(|a| {
                let c = self.counts[a];
                emoji_state(*a, c.likes, c.clarifies, c.comments)
            })
            .collect();
        CloudState {
            meeting_id: self.meeting_id.clone(),
            version: self.version,
            at_ms: self.at_ms,
            emojis,
            recording,
        }
    }

    /// Folds the joins and events in `(from_ms, to_ms]` (or `[0, to_ms]` when
    /// `from_ms` is `None`) in merged time order, then advances to `to_ms`.
    pub fn fold_window(&mut self, events: &[Event], joins: &[JoinRecord], from_ms: Option<u64>, to_ms: u64) {
        let in_window = |ts: u64| from_ms.map_or(true, |f| ts > f) && ts <= to_ms;
        let mut joins = joins.iter().filter(|j| in_window(j.at_ms)).peekable();
        for event in events.iter().filter(|e| in_window(e.ts_ms())) {
            while let Some(j) = joins.next_if(|j| j.at_ms <= event.ts_ms()) {
                self.join(j);
            }
            self.apply(event);
        }
        joins.for_each(|j| self.join(j));
        self.advance_to(to_ms);
    }
}

/// The cloud as it stood at `at_ms`: every join and event stamped at or
/// before the horizon, folded cumulatively.
pub fn cloud_at(
    meeting_id: &MeetingId,
    events: &[Event],
    joins: &[JoinRecord],
    at_ms: u64,
    recording: bool,
) -> CloudState {
    let mut fold = CloudFold::new(meeting_id.clone());
    fold.fold_window(events, joins, None, at_ms);
    fold.snapshot(recording)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Payload;

    fn id(n: u8) -> AttendeeId {
        AttendeeId::from_bytes([n; 16])
    }

    fn like(seq: u64, ts: u64, who: AttendeeId) -> Event {
        Event::new(seq, ts, who, Payload::Reaction { kind: ReactionKind::Like }).unwrap()
    }

    fn clarify(seq: u64, ts: u64, who: AttendeeId) -> Event {
        Event::new(seq, ts, who, Payload::Reaction { kind: ReactionKind::Clarify }).unwrap()
    }

    #[test]
    fn mood_examples() {
        assert_eq!(mood_score(0, 0), 0.0);
        assert_eq!(mood_score(5, 0), 1.0);
        assert_eq!(mood_score(0, 5), -1.0);
        assert_eq!(mood_score(3, 1), 0.5);
    }

    #[test]
    fn color_stops_and_midpoint() {
        assert_eq!(color_of(1.0).unwrap(), Rgb(0, 163, 155));
        assert_eq!(color_of(-1.0).unwrap(), Rgb(244, 194, 13));
        assert_eq!(color_of(0.0).unwrap(), Rgb(200, 200, 200));
        assert_eq!(color_of(0.5).unwrap(), Rgb(100, 182, 178));
        // (244+200)/2 = 222, (194+200)/2 = 197, (13+200)/2 = 106.5 -> 107
        assert_eq!(color_of(-0.5).unwrap(), Rgb(222, 197, 107));
    }

    #[test]
    fn color_rejects_out_of_range() {
        assert!(matches!(color_of(1.0001), Err(ValidationError::MoodRange(_))));
        assert!(matches!(color_of(-2.0), Err(ValidationError::MoodRange(_))));
        assert!(color_of(f64::NAN).is_err());
    }

    #[test]
    fn expression_thresholds_are_strict() {
        assert_eq!(expression_of(0.15), Expression::Neutral);
        assert_eq!(expression_of(-0.15), Expression::Neutral);
        assert_eq!(expression_of(0.1500001), Expression::Happy);
        assert_eq!(expression_of(-0.1500001), Expression::Thinking);
    }

    #[test]
    fn emoji_examples() {
        let e = emoji_state(id(1), 0, 0, 0);
        assert_eq!((e.mood, e.color, e.size_scale, e.expression), (0.0, GRAY, 1.0, Expression::Neutral));
        assert_eq!(emoji_state(id(1), 0, 0, 3).size_scale, 2.0);
        assert_eq!(emoji_state(id(1), 0, 0, 1000).size_scale, 2.5);
    }

    #[test]
    fn cloud_at_horizon_example() {
        // A: like@10s, like@70s; B: clarify@65s
        let (a, b) = (id(1), id(2));
        let joins = [JoinRecord { attendee: a, at_ms: 0 }, JoinRecord { attendee: b, at_ms: 0 }];
        let events = [like(1, 10_000, a), clarify(2, 65_000, b), like(3, 70_000, a)];
        let mid = MeetingId::new("m1").unwrap();
        let cloud = cloud_at(&mid, &events, &joins, 60_000, false);
        assert_eq!(cloud.version, 1);
        assert_eq!((cloud.emojis[0].like_count, cloud.emojis[0].clarify_count), (1, 0));
        assert_eq!((cloud.emojis[1].like_count, cloud.emojis[1].clarify_count), (0, 0));

        let all = cloud_at(&mid, &events, &joins, u64::MAX, false);
        assert_eq!(all.version, 3);
        assert_eq!(all.total_reactions(), 3);
    }

    #[test]
    fn cloud_before_any_event_has_joined_attendees_at_zero() {
        let joins = [JoinRecord { attendee: id(1), at_ms: 0 }, JoinRecord { attendee: id(2), at_ms: 5_000 }];
        let mid = MeetingId::new("m1").unwrap();
        let cloud = cloud_at(&mid, &[], &joins, 0, true);
        assert_eq!(cloud.version, 0);
        assert_eq!(cloud.emojis.len(), 1);
        assert_eq!(cloud.emojis[0].mood, 0.0);
        assert!(cloud.recording);
    }

    #[test]
    fn resumed_fold_matches_batch() {
        let (a, b) = (id(1), id(2));
        let joins = [JoinRecord { attendee: a, at_ms: 0 }, JoinRecord { attendee: b, at_ms: 30_000 }];
        let events = [like(1, 10_000, a), clarify(2, 65_000, b), like(3, 70_000, a)];
        let mid = MeetingId::new("m").unwrap();
        let early = cloud_at(&mid, &events, &joins, 20_000, false);
        let mut fold = CloudFold::from_state(&early);
        fold.fold_window(&events, &joins, Some(20_000), 66_000);
        assert_eq!(fold.snapshot(false), cloud_at(&mid, &events, &joins, 66_000, false));
    }
}
