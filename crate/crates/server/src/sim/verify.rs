//! Replays a trace offline and checks every engine output against the
//! brute-force oracles, optionally also against an expected `summary.json`.

use std::fmt;

use meetcues_core::{MeetingId, SnippetConfig, SummaryReport};
use serde::Serialize;
use serde_json::Value;

use super::oracle;
use super::run::{simulate, SimOptions, Target};
use super::trace::Trace;
use super::SimError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name)?;
            for d in &c.details {
                writeln!(f, "    {d}")?;
            }
        }
        write!(f, "{}", if self.passed() { "verify: pass" } else { "verify: FAIL" })
    }
}

const MAX_DETAILS: usize = 20;

struct Collector {
    checks: Vec<Check>,
}

impl Collector {
    fn check(&mut self, name: &'static str, details: Vec<String>) {
        let passed = details.is_empty();
        let mut details = details;
        if details.len() > MAX_DETAILS {
            let more = details.len() - MAX_DETAILS;
            details.truncate(MAX_DETAILS);
            details.push(format!("... and {more} more"));
        }
        self.checks.push(Check { name, passed, details });
    }
}

/// Structural JSON diff as `path: expected X, got Y` lines.
pub fn json_diff(expected: &Value, actual: &Value) -> Vec<String> {
    fn walk(path: &str, e: &Value, a: &Value, out: &mut Vec<String>) {
        match (e, a) {
            (Value::Object(eo), Value::Object(ao)) => {
                for (k, ev) in eo {
                    let p = format!("{path}.{k}");
                    match ao.get(k) {
                        Some(av) => walk(&p, ev, av, out),
                        None => out.push(format!("{p}: missing")),
                    }
                }
                for k in ao.keys().filter(|k| !eo.contains_key(*k)) {
                    out.push(format!("{path}.{k}: unexpected"));
                }
            }
            (Value::Array(ea), Value::Array(aa)) => {
                if ea.len() != aa.len() {
                    out.push(format!("{path}: expected {} items, got {}", ea.len(), aa.len()));
                }
                for (i, (ev, av)) in ea.iter().zip(aa).enumerate() {
                    walk(&format!("{path}[{i}]"), ev, av, out);
                }
            }
            _ if e != a => out.push(format!("{path}: expected {e}, got {a}")),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk("$", expected, actual, &mut out);
    out
}

fn diff_list<T: PartialEq + fmt::Debug>(what: &str, expected: &[T], actual: &[T]) -> Vec<String> {
    if expected == actual {
        return Vec::new();
    }
    let mut out = vec![format!("{what}: oracle has {} entries, engine {}", expected.len(), actual.len())];
    out.extend(
        expected
            .iter()
            .zip(actual)
            .enumerate()
            .filter(|(_, (e, a))| e != a)
            .map(|(i, (e, a))| format!("{what}[{i}]: oracle {e:?}, engine {a:?}")),
    );
    out
}

/// Runs `trace` offline and compares. Fails with an error only when the
/// trace cannot be replayed at all.
pub async fn verify(trace: &Trace, config: &SnippetConfig, expected: Option<&[u8]>) -> Result<VerifyReport, SimError> {
    let target = Target::offline(config.clone());
    let Target::Offline(service) = target.clone() else { unreachable!() };
    let run = simulate(trace, target, &SimOptions::default()).await?;
    let id: &MeetingId = &run.meeting_id;
    let events = service.events(id)?;
    let joins = service.joins(id)?;
    let session = service.session(id)?;
    let mut c = Collector { checks: Vec::new() };

    c.check(
        "event log",
        meetcues_core::validate_event_log(&events).err().map(|e| e.to_string()).into_iter().collect(),
    );

    let live = service.state(id, None)?;
    let horizon = live.at_ms;
    let (version, emojis) = oracle::cloud(&events, &joins, horizon);
    let engine: Vec<oracle::OracleEmoji> = live.emojis.iter().map(Into::into).collect();
    let mut details = diff_list("emoji", &emojis, &engine);
    if version != live.version {
        details.push(format!("version: oracle {version}, engine {}", live.version));
    }
    c.check("cloud fold", details);

    let (chrono, popular) = oracle::comments(&events);
    let listed = |order| -> Result<Vec<_>, SimError> {
        Ok(service.list_comments(id, order)?.into_iter().map(|c| (c.comment_id, c.upvotes)).collect())
    };
    let mut details = diff_list("chrono", &chrono, &listed(meetcues_core::CommentOrder::Chrono)?);
    details.extend(diff_list("popularity", &popular, &listed(meetcues_core::CommentOrder::Popularity)?));
    c.check("comment order", details);

    let Some(summary_bytes) = run.summary.as_deref() else {
        c.check("summary", vec!["meeting did not end; no summary to check".into()]);
        return Ok(VerifyReport { checks: c.checks });
    };
    let report: SummaryReport = match serde_json::from_slice(summary_bytes) {
        Ok(r) => r,
        Err(e) => {
            c.check("summary", vec![format!("summary.json does not parse: {e}")]);
            return Ok(VerifyReport { checks: c.checks });
        }
    };
    let duration = session.duration_ms().unwrap_or(0);

    let expected_buckets = oracle::timeline(&events, duration, config);
    let engine_buckets: Vec<oracle::OracleBucket> = report
        .timeline
        .iter()
        .map(|b| oracle::OracleBucket {
            reactions: b.reactions,
            comments: b.comments,
            upvotes: b.upvotes,
            raw: b.raw,
            norm: b.norm,
        })
        .collect();
    c.check("timeline", diff_list("bucket", &expected_buckets, &engine_buckets));

    let planned = oracle::intervals(&events, duration, config);
    let recording = service.store().read_recording(id).map_err(crate::error::ServiceError::from)?;
    let mut details = Vec::new();
    let expected_snippets: Vec<(f64, f64, Vec<u8>)> = match (&recording, session.recording_enabled()) {
        (Some((wav, meta)), true) if oracle::data_region(wav).is_some() => planned
            .iter()
            .filter_map(|&(s, e)| {
                let bytes = oracle::slice(wav, s, e, meta.offset_ms)?;
                (!bytes.is_empty()).then_some((s, e, bytes))
            })
            .collect(),
        _ => Vec::new(),
    };
    let got: Vec<(f64, f64)> = report.snippets.iter().map(|s| (s.start_s, s.end_s)).collect();
    let want: Vec<(f64, f64)> = expected_snippets.iter().map(|(s, e, _)| (*s, *e)).collect();
    details.extend(diff_list("snippet", &want, &got));
    for (i, (_, _, bytes)) in expected_snippets.iter().enumerate() {
        let Ok(stored) = service.snippet_bytes(id, i) else {
            details.push(format!("snippet {i}: file missing"));
            continue;
        };
        match oracle::data_region(&stored) {
            Some((data, ..)) if data == bytes.as_slice() => {}
            Some(_) => details.push(format!("snippet {i}: data differs from the source slice")),
            None => details.push(format!("snippet {i}: not a valid WAV")),
        }
    }
    c.check("snippets", details);

    let mut details = Vec::new();
    let final_cloud = oracle::cloud(&events, &joins, duration);
    if report.cloud.version != final_cloud.0 || report.cloud.emojis.len() != final_cloud.1.len() {
        details.push("summary cloud differs from the oracle fold at the end".into());
    }
    if report.cloud != live {
        details.push("summary cloud differs from the live state after end".into());
    }
    let comment_ids = |v: &[meetcues_core::CommentEntry]| v.iter().map(|c| (c.comment_id.clone(), c.upvotes)).collect::<Vec<_>>();
    details.extend(diff_list("summary chrono", &chrono, &comment_ids(&report.comments_chrono)));
    details.extend(diff_list("summary popularity", &popular, &comment_ids(&report.comments_popular)));
    if report.attendee_count as usize != final_cloud.1.len() {
        details.push(format!("attendee_count {} but {} attendees", report.attendee_count, final_cloud.1.len()));
    }
    c.check("summary", details);

    if let Some(expected) = expected {
        let details = match (serde_json::from_slice::<Value>(expected), serde_json::from_slice::<Value>(summary_bytes)) {
            (Ok(e), Ok(a)) => json_diff(&e, &a),
            (Err(e), _) => vec![format!("expected file is not JSON: {e}")],
            (_, Err(e)) => vec![format!("summary is not JSON: {e}")],
        };
        c.check("expected summary", details);
    }
    Ok(VerifyReport { checks: c.checks })
}
