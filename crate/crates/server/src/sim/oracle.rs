//! Brute-force reference computations. Deliberately naive and independent
//! of the engines in `meetcues-core`: every bucket rescans the whole log,
//! intervals come from a per-bucket union, counts come from raw scans.

use std::collections::{BTreeMap, HashSet};

use meetcues_core::{
    AttendeeId, CommentId, EmojiState, Event, Expression, JoinRecord, Normalization, Payload, ReactionKind, SnippetConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBucket {
    pub reactions: u64,
    pub comments: u64,
    pub upvotes: u64,
    pub raw: f64,
    pub norm: f64,
}

fn in_bucket(ts_ms: u64, b: usize, n: usize, width_ms: u64) -> bool {
    let start = b as u64 * width_ms;
    ts_ms >= start && (ts_ms < start + width_ms || b + 1 == n)
}

pub fn timeline(events: &[Event], duration_ms: u64, config: &SnippetConfig) -> Vec<OracleBucket> {
    let width_ms = u64::from(config.bucket_s()) * 1000;
    let mut n = 0;
    while (n as u64) * width_ms < duration_ms {
        n += 1;
    }
    let w = config.weights();
    let mut buckets: Vec<OracleBucket> = (0..n)
        .map(|b| {
            let here: Vec<&Event> = events.iter().filter(|e| in_bucket(e.ts_ms(), b, n, width_ms)).collect();
            let count = |f: fn(&Payload) -> bool| here.iter().filter(|e| f(e.payload())).count() as u64;
            let reactions = count(|p| matches!(p, Payload::Reaction { .. }));
            let comments = count(|p| matches!(p, Payload::Comment { .. }));
            let upvotes = count(|p| matches!(p, Payload::Upvote { .. }));
            let raw = w.reaction * reactions as f64 + w.comment * comments as f64 + w.upvote * upvotes as f64;
            OracleBucket { reactions, comments, upvotes, raw, norm: 0.0 }
        })
        .collect();
    let denom = match config.normalization() {
        Normalization::Max => buckets.iter().map(|b| b.raw).fold(0.0, f64::max),
        Normalization::Total => buckets.iter().map(|b| b.raw).sum(),
    };
    if denom > 0.0 {
        for b in &mut buckets {
            b.norm = b.raw / denom;
        }
    }
    buckets
}

/// Snippet intervals in seconds: each qualifying bucket padded and clamped,
/// then the union of all of them with touching pieces joined.
pub fn intervals(events: &[Event], duration_ms: u64, config: &SnippetConfig) -> Vec<(f64, f64)> {
    let width = f64::from(config.bucket_s());
    let pad = f64::from(config.pad_s());
    let duration_s = duration_ms as f64 / 1000.0;
    let mut pieces: Vec<(f64, f64)> = timeline(events, duration_ms, config)
        .iter()
        .enumerate()
        .filter(|(_, b)| b.norm >= config.threshold())
        .map(|(i, _)| ((i as f64 * width - pad).max(0.0), ((i + 1) as f64 * width + pad).min(duration_s)))
        .filter(|(s, e)| e > s)
        .collect();
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (s, e) in pieces {
        match out.last_mut() {
            Some(last) if last.1 >= s => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEmoji {
    pub attendee: AttendeeId,
    pub likes: u64,
    pub clarifies: u64,
    pub comments: u64,
    pub mood: f64,
    pub color: (u8, u8, u8),
    pub size_scale: f64,
    pub expression: &'static str,
}

fn lerp(a: u8, b: u8, t: f64) -> u8 {
    (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8
}

impl From<&EmojiState> for OracleEmoji {
    /// Restates an engine emoji in oracle terms for comparison.
    fn from(e: &EmojiState) -> Self {
        OracleEmoji {
            attendee: e.attendee,
            likes: e.like_count,
            clarifies: e.clarify_count,
            comments: e.comment_count,
            mood: e.mood,
            color: (e.color.0, e.color.1, e.color.2),
            size_scale: e.size_scale,
            expression: match e.expression {
                Expression::Happy => "happy",
                Expression::Neutral => "neutral",
                Expression::Thinking => "thinking",
            },
        }
    }
}

/// Yellow at -1, gray at 0, teal at +1, linear in between.
pub fn color(mood: f64) -> (u8, u8, u8) {
    let (yellow, gray, teal) = ((244, 194, 13), (200, 200, 200), (0, 163, 155));
    let (from, to, t) = if mood < 0.0 { (gray, yellow, -mood) } else { (gray, teal, mood) };
    (lerp(from.0, to.0, t), lerp(from.1, to.1, t), lerp(from.2, to.2, t))
}

/// Per-attendee cloud at `at_ms`, in order of first appearance among the
/// joins stamped by then.
pub fn cloud(events: &[Event], joins: &[JoinRecord], at_ms: u64) -> (u64, Vec<OracleEmoji>) {
    let visible: Vec<&Event> = events.iter().filter(|e| e.ts_ms() <= at_ms).collect();
    let mut order: Vec<AttendeeId> = Vec::new();
    let mut timed: Vec<(u64, u8, AttendeeId)> = joins.iter().filter(|j| j.at_ms <= at_ms).map(|j| (j.at_ms, 0, j.attendee)).collect();
    timed.extend(visible.iter().map(|e| (e.ts_ms(), 1, e.attendee())));
    timed.sort_by_key(|(t, kind, _)| (*t, *kind));
    for (_, _, a) in timed {
        if !order.contains(&a) {
            order.push(a);
        }
    }
    let emojis = order
        .into_iter()
        .map(|attendee| {
            let mine = || visible.iter().filter(move |e| e.attendee() == attendee);
            let likes = mine().filter(|e| e.payload() == &Payload::Reaction { kind: ReactionKind::Like }).count() as u64;
            let clarifies =
                mine().filter(|e| e.payload() == &Payload::Reaction { kind: ReactionKind::Clarify }).count() as u64;
            let comments = mine().filter(|e| matches!(e.payload(), Payload::Comment { .. })).count() as u64;
            let mood = (likes as f64 - clarifies as f64) / ((likes + clarifies).max(1)) as f64;
            let expression = if mood > 0.15 {
                "happy"
            } else if mood < -0.15 {
                "thinking"
            } else {
                "neutral"
            };
            OracleEmoji {
                attendee,
                likes,
                clarifies,
                comments,
                mood,
                color: color(mood),
                size_scale: (1.0 + (1.0 + comments as f64).log2() / 2.0).min(2.5),
                expression,
            }
        })
        .collect();
    let version = visible.last().map_or(0, |e| e.seq());
    (version, emojis)
}

/// Comments with distinct-voter upvote counts, in chronological and in
/// popularity order (upvotes descending, then seq).
pub fn comments(events: &[Event]) -> (Vec<(CommentId, u64)>, Vec<(CommentId, u64)>) {
    let mut chrono: Vec<(u64, CommentId)> = events
        .iter()
        .filter_map(|e| match e.payload() {
            Payload::Comment { comment_id, .. } => Some((e.seq(), comment_id.clone())),
            _ => None,
        })
        .collect();
    chrono.sort();
    let votes: BTreeMap<CommentId, u64> = chrono
        .iter()
        .map(|(_, id)| {
            let voters: HashSet<AttendeeId> = events
                .iter()
                .filter(|e| matches!(e.payload(), Payload::Upvote { comment_id } if comment_id == id))
                .map(Event::attendee)
                .collect();
            (id.clone(), voters.len() as u64)
        })
        .collect();
    let chrono: Vec<(u64, CommentId, u64)> = chrono.into_iter().map(|(s, id)| { let v = votes[&id]; (s, id, v) }).collect();
    let mut popular = chrono.clone();
    // insertion sort keeps this free of the engine's sort key
    for i in 1..popular.len() {
        let mut j = i;
        while j > 0 && (popular[j - 1].2 < popular[j].2 || (popular[j - 1].2 == popular[j].2 && popular[j - 1].0 > popular[j].0)) {
            popular.swap(j - 1, j);
            j -= 1;
        }
    }
    let strip = |v: Vec<(u64, CommentId, u64)>| v.into_iter().map(|(_, id, n)| (id, n)).collect();
    (strip(chrono), strip(popular))
}

/// The PCM data region of a WAV file, found by walking RIFF chunks.
pub fn data_region(wav: &[u8]) -> Option<(&[u8], u16, u32)> {
    if wav.len() < 12 || &wav[0..4] != b"RIFF" || &wav[8..12] != b"WAVE" {
        return None;
    }
    let mut at = 12;
    let mut fmt = None;
    while at + 8 <= wav.len() {
        let id = &wav[at..at + 4];
        let size = u32::from_le_bytes(wav[at + 4..at + 8].try_into().ok()?) as usize;
        let body = &wav[at + 8..wav.len().min(at + 8 + size)];
        if id == b"fmt " && body.len() >= 16 {
            let channels = u16::from_le_bytes([body[2], body[3]]);
            let rate = u32::from_le_bytes(body[4..8].try_into().ok()?);
            fmt = Some((channels, rate));
        }
        if id == b"data" {
            let (channels, rate) = fmt?;
            let block = usize::from(channels) * 2;
            return Some((&body[..body.len() / block * block], channels, rate));
        }
        at += 8 + size + (size & 1);
    }
    None
}

/// Expected bytes of the snippet `[start_s, end_s)` cut from `source`
/// recorded `offset_ms` after meeting start.
pub fn slice(source: &[u8], start_s: f64, end_s: f64, offset_ms: u64) -> Option<Vec<u8>> {
    let (data, channels, rate) = data_region(source)?;
    let block = usize::from(channels) * 2;
    let frames = data.len() / block;
    let offset = offset_ms as f64 / 1000.0;
    let frame = |s: f64| {
        let f = ((s - offset) * f64::from(rate)).floor();
        if f < 0.0 { 0 } else { (f as usize).min(frames) }
    };
    let (lo, hi) = (frame(start_s), frame(end_s));
    Some(if hi > lo { data[lo * block..hi * block].to_vec() } else { Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn like(seq: u64, ts: u64) -> Event {
        Event::new(seq, ts, AttendeeId::from_bytes([1; 16]), Payload::Reaction { kind: ReactionKind::Like }).unwrap()
    }

    #[test]
    fn five_bucket_example() {
        let mut events = Vec::new();
        for (bucket, n) in [(0u64, 2u64), (2, 10), (3, 9)] {
            for k in 0..n {
                events.push(like(events.len() as u64 + 1, bucket * 60_000 + k * 1000));
            }
        }
        let t = timeline(&events, 300_000, &SnippetConfig::default());
        let norms: Vec<f64> = t.iter().map(|b| b.norm).collect();
        assert_eq!(norms, vec![0.2, 0.0, 1.0, 0.9, 0.0]);
        assert_eq!(intervals(&events, 300_000, &SnippetConfig::default()), vec![(120.0, 240.0)]);
    }

    #[test]
    fn color_stops() {
        assert_eq!(color(1.0), (0, 163, 155));
        assert_eq!(color(-1.0), (244, 194, 13));
        assert_eq!(color(0.5), (100, 182, 178));
        assert_eq!(color(0.0), (200, 200, 200));
    }

    #[test]
    fn popularity_example() {
        let a = |n: u8| AttendeeId::from_bytes([n; 16]);
        let c = |seq: u64| Event::new(seq, 0, a(0), Payload::Comment {
            comment_id: CommentId::for_seq(seq),
            text: meetcues_core::CommentText::new("q").unwrap(),
        }).unwrap();
        let up = |seq: u64, target: u64, who: u8| {
            Event::new(seq, 0, a(who), Payload::Upvote { comment_id: CommentId::for_seq(target) }).unwrap()
        };
        let mut events = vec![c(1), c(2), c(3)];
        let mut seq = 4;
        for (target, voters) in [(1, 2u8), (2, 5), (3, 2)] {
            for v in 0..voters {
                events.push(up(seq, target, v + 1));
                seq += 1;
            }
        }
        let (chrono, popular) = comments(&events);
        let ids = |v: &[(CommentId, u64)]| v.iter().map(|(id, _)| id.as_str().to_owned()).collect::<Vec<_>>();
        assert_eq!(ids(&chrono), ["c1", "c2", "c3"]);
        assert_eq!(ids(&popular), ["c2", "c1", "c3"]);
    }
}
