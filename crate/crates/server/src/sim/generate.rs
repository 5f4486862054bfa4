//! Seeded synthetic traces: everyone joins at 0, the host starts at 0 and
//! ends at the duration, and activity is spread uniformly inside bursts.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use super::trace::{Action, Trace, TraceLine};

/// `events_per_min` actions spread uniformly over `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub start_s: f64,
    pub end_s: f64,
    pub events_per_min: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("burst {0:?} must be start:end:rate with 0 <= start < end and rate >= 0")]
    BadBurst(String),
    #[error("burst {start_s}-{end_s} lies outside the {duration_s} s meeting")]
    OutOfRange { start_s: f64, end_s: f64, duration_s: f64 },
    #[error("a trace needs at least one attendee and a positive duration")]
    Empty,
}

impl FromStr for Burst {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GenerateError::BadBurst(s.to_owned());
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let [start_s, end_s, events_per_min] = parts[..] else { return Err(bad()) };
        if !(start_s >= 0.0 && end_s > start_s && events_per_min >= 0.0 && end_s.is_finite() && events_per_min.is_finite()) {
            return Err(bad());
        }
        Ok(Burst { start_s, end_s, events_per_min })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub attendees: usize,
    pub duration_s: f64,
    pub bursts: Vec<Burst>,
    pub seed: u64,
    /// Sample rate of a tone recording uploaded at start; `None` records nothing.
    pub audio_rate: Option<u32>,
}

pub fn actor_name(i: usize) -> String {
    format!("a{i:03}")
}

pub const HOST: &str = "host";

/// Builds the trace. Kinds are drawn as like 50 %, clarify 25 %,
/// comment 15 %, upvote 10 % (a like when no comment exists yet); upvotes
/// target a uniformly chosen earlier comment.
pub fn generate(config: &GenerateConfig) -> Result<Trace, GenerateError> {
    if config.attendees == 0 || !(config.duration_s > 0.0) {
        return Err(GenerateError::Empty);
    }
    for b in &config.bursts {
        if b.end_s > config.duration_s {
            return Err(GenerateError::OutOfRange { start_s: b.start_s, end_s: b.end_s, duration_s: config.duration_s });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration_ms = (config.duration_s * 1000.0).round() as u64;
    let mut lines: Vec<TraceLine> =
        (0..config.attendees).map(|i| TraceLine::new(0, actor_name(i), Action::Join, serde_json::Value::Null)).collect();
    if let Some(rate) = config.audio_rate {
        let tone = json!({"tone": {"rate": rate, "seconds": config.duration_s}});
        lines.push(TraceLine::new(0, HOST, Action::UploadAudio, tone));
    }
    lines.push(TraceLine::new(0, HOST, Action::Start, serde_json::Value::Null));

    let mut times = Vec::new();
    for b in &config.bursts {
        let (lo, hi) = ((b.start_s * 1000.0).round() as u64, (b.end_s * 1000.0).round() as u64);
        let count = (b.events_per_min * (b.end_s - b.start_s) / 60.0).round() as usize;
        times.extend((0..count).map(|_| rng.random_range(lo..hi)));
    }
    times.sort_unstable();

    let mut labels: Vec<String> = Vec::new();
    for at_ms in times {
        let actor = actor_name(rng.random_range(0..config.attendees));
        let roll: f64 = rng.random();
        let line = if roll < 0.5 || (roll >= 0.9 && labels.is_empty()) {
            TraceLine::new(at_ms, actor, Action::Like, serde_json::Value::Null)
        } else if roll < 0.75 {
            TraceLine::new(at_ms, actor, Action::Clarify, serde_json::Value::Null)
        } else if roll < 0.9 {
            let label = format!("k{}", labels.len() + 1);
            let args = json!({"text": format!("comment {} from {actor}", labels.len() + 1), "label": label});
            labels.push(label);
            TraceLine::new(at_ms, actor, Action::Comment, args)
        } else {
            let target = &labels[rng.random_range(0..labels.len())];
            TraceLine::new(at_ms, actor, Action::Upvote, json!({"ref": target}))
        };
        lines.push(line);
    }
    lines.push(TraceLine::new(duration_ms, HOST, Action::End, serde_json::Value::Null));
    Ok(Trace { lines })
}
