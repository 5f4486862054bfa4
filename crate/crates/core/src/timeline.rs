//! Per-slice engagement counts and their normalization.

use crate::domain::{Event, Normalization, Payload, SnippetConfig, TimelineBucket};

/// Number of slices covering `duration_ms`: `ceil(duration / bucket)`.
pub fn bucket_count(duration_ms: u64, config: &SnippetConfig) -> usize {
    duration_ms.div_ceil(config.bucket_ms()) as usize
}

/// Slice index of a timestamp. Events stamped at or after the final slice
/// boundary (only possible at the exact end instant) land in the last slice.
pub fn bucket_of(ts_ms: u64, buckets: usize, config: &SnippetConfig) -> usize {
    ((ts_ms / config.bucket_ms()) as usize).min(buckets.saturating_sub(1))
}

/// Engagement timeline over a meeting of `duration_ms`.
pub fn timeline(events: &[Event], duration_ms: u64, config: &SnippetConfig) -> Vec<TimelineBucket> {
    let n = bucket_count(duration_ms, config);
    let mut counts = vec![(0u64, 0u64, 0u64); n];
    if n > 0 {
        for e in events {
            let slot = &mut counts[bucket_of(e.ts_ms(), n, config)];
            match e.payload() {
                Payload::Reaction { .. } => slot.0 += 1,
                Payload::Comment { .. } => slot.1 += 1,
                Payload::Upvote { .. } => slot.2 += 1,
            }
        }
    }
    from_counts(&counts, config)
}

/// Builds buckets from `(reactions, comments, upvotes)` per slice.
pub fn from_counts(counts: &[(u64, u64, u64)], config: &SnippetConfig) -> Vec<TimelineBucket> {
    let w = config.weights();
    let raw: Vec<f64> = counts
        .iter()
        .map(|&(r, c, u)| w.reaction * r as f64 + w.comment * c as f64 + w.upvote * u as f64)
        .collect();
    let denom = match config.normalization() {
        Normalization::Max => raw.iter().copied().fold(0.0, f64::max),
        Normalization::Total => raw.iter().sum(),
    };
    counts
        .iter()
        .zip(&raw)
        .enumerate()
        .map(|(i, (&(reactions, comments, upvotes), &raw))| TimelineBucket {
            index: i as u64,
            start_s: i as u64 * u64::from(config.bucket_s()),
            reactions,
            comments,
            upvotes,
            raw,
            norm: if denom > 0.0 { raw / denom } else { 0.0 },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttendeeId, EngagementWeights, ReactionKind};

    fn react(seq: u64, ts: u64) -> Event {
        Event::new(seq, ts, AttendeeId::from_bytes([1; 16]), Payload::Reaction { kind: ReactionKind::Like })
            .unwrap()
    }

    #[test]
    fn seminar_length_gives_one_bucket_per_minute() {
        let t = timeline(&[], 190 * 60_000, &SnippetConfig::default());
        assert_eq!(t.len(), 190);
        assert!(t.iter().all(|b| b.raw == 0.0 && b.norm == 0.0));
    }

    #[test]
    fn partial_final_minute_gets_a_bucket() {
        assert_eq!(bucket_count(60_001, &SnippetConfig::default()), 2);
        assert_eq!(bucket_count(0, &SnippetConfig::default()), 0);
    }

    #[test]
    fn normalizes_by_busiest_bucket() {
        let counts = [(2, 0, 0), (0, 0, 0), (10, 0, 0), (9, 0, 0), (0, 0, 0)];
        let norms: Vec<f64> = from_counts(&counts, &SnippetConfig::default()).iter().map(|b| b.norm).collect();
        assert_eq!(norms, vec![0.2, 0.0, 1.0, 0.9, 0.0]);
    }

    #[test]
    fn total_normalization_divides_by_sum() {
        let cfg = SnippetConfig::default().with_normalization(Normalization::Total);
        let norms: Vec<f64> = from_counts(&[(1, 0, 0), (3, 0, 0)], &cfg).iter().map(|b| b.norm).collect();
        assert_eq!(norms, vec![0.25, 0.75]);
    }

    #[test]
    fn half_open_windows_and_end_instant() {
        let events = [react(1, 59_999), react(2, 60_000), react(3, 120_000)];
        let t = timeline(&events, 120_000, &SnippetConfig::default());
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].reactions, t[1].reactions), (1, 2));
    }

    #[test]
    fn upvote_weight_is_configurable() {
        let cfg = SnippetConfig::new(60, 0.3, EngagementWeights { reaction: 1.0, comment: 1.0, upvote: 0.5 }, 0)
            .unwrap();
        let b = &from_counts(&[(1, 2, 4)], &cfg)[0];
        assert_eq!(b.raw, 5.0);
        assert_eq!(from_counts(&[(1, 2, 4)], &SnippetConfig::default())[0].raw, 3.0);
    }
}
