//! Meeting traces: NDJSON lines of
//! `{"at_ms":N,"actor":"name","action":"...","args":{...}}`, sorted by `at_ms`.
//!
//! Action arguments:
//!
//! | action         | args                                                        |
//! |----------------|-------------------------------------------------------------|
//! | `join`         | `email` (default `<actor>@sim.invalid`)                     |
//! | `like`/`clarify` | none                                                      |
//! | `comment`      | `text`, optional `label` for later upvotes                  |
//! | `upvote`       | `ref`: label of an earlier comment                          |
//! | `start`/`end`  | none; the actor is the host                                 |
//! | `upload_audio` | `path` of a WAV, or `tone: {rate, seconds}`; `offset_ms`    |

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Join,
    Like,
    Clarify,
    Comment,
    Upvote,
    Start,
    End,
    UploadAudio,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Join => "join",
            Action::Like => "like",
            Action::Clarify => "clarify",
            Action::Comment => "comment",
            Action::Upvote => "upvote",
            Action::Start => "start",
            Action::End => "end",
            Action::UploadAudio => "upload_audio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub at_ms: u64,
    pub actor: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioSource {
    Path(String),
    Tone { rate: u32, seconds: f64 },
}

/// A trace line with its arguments resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Join { email: String },
    Reaction { like: bool },
    Comment { text: String, label: Option<String> },
    Upvote { label: String },
    Start,
    End,
    UploadAudio { source: AudioSource, offset_ms: u64 },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("trace line {line}: at_ms {at_ms} is earlier than the previous line")]
    Unsorted { line: usize, at_ms: u64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinArgs {
    email: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommentArgs {
    text: String,
    label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UpvoteArgs {
    #[serde(rename = "ref")]
    label: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadArgs {
    path: Option<String>,
    tone: Option<ToneArgs>,
    #[serde(default)]
    offset_ms: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToneArgs {
    rate: u32,
    seconds: f64,
}

fn args<T: serde::de::DeserializeOwned>(value: &Value) -> Result<T, String> {
    let value = if value.is_null() { Value::Object(Default::default()) } else { value.clone() };
    serde_json::from_value(value).map_err(|e| e.to_string())
}

impl TraceLine {
    pub fn new(at_ms: u64, actor: impl Into<String>, action: Action, args: Value) -> Self {
        Self { at_ms, actor: actor.into(), action, args }
    }

    pub fn step(&self) -> Result<Step, String> {
        Ok(match self.action {
            Action::Join => {
                let a: JoinArgs = args(&self.args)?;
                Step::Join { email: a.email.unwrap_or_else(|| format!("{}@sim.invalid", self.actor)) }
            }
            Action::Like | Action::Clarify => Step::Reaction { like: self.action == Action::Like },
            Action::Comment => {
                let a: CommentArgs = args(&self.args)?;
                Step::Comment { text: a.text, label: a.label }
            }
            Action::Upvote => Step::Upvote { label: args::<UpvoteArgs>(&self.args)?.label },
            Action::Start => Step::Start,
            Action::End => Step::End,
            Action::UploadAudio => {
                let a: UploadArgs = args(&self.args)?;
                let source = match (a.path, a.tone) {
                    (Some(p), None) => AudioSource::Path(p),
                    (None, Some(t)) => AudioSource::Tone { rate: t.rate, seconds: t.seconds },
                    _ => return Err("upload_audio needs exactly one of path or tone".into()),
                };
                Step::UploadAudio { source, offset_ms: a.offset_ms }
            }
        })
    }
}

/// A validated trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub lines: Vec<TraceLine>,
}

impl Trace {
    /// Parses NDJSON, skipping blank lines. Lines must be sorted by `at_ms`
    /// and carry well-formed arguments.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut lines: Vec<TraceLine> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: TraceLine = serde_json::from_str(raw)
                .map_err(|e| TraceError::Malformed { line: i + 1, reason: e.to_string() })?;
            line.step().map_err(|reason| TraceError::Malformed { line: i + 1, reason })?;
            if lines.last().is_some_and(|prev| prev.at_ms > line.at_ms) {
                return Err(TraceError::Unsorted { line: i + 1, at_ms: line.at_ms });
            }
            lines.push(line);
        }
        Ok(Self { lines })
    }

    pub fn to_ndjson(&self) -> String {
        self.lines.iter().map(|l| serde_json::to_string(l).expect("trace lines serialize") + "\n").collect()
    }

    pub fn has_audio(&self) -> bool {
        self.lines.iter().any(|l| l.action == Action::UploadAudio)
    }

    /// The actor of the first `start` or `end` line, else `"host"`.
    pub fn host(&self) -> &str {
        self.lines
            .iter()
            .find(|l| matches!(l.action, Action::Start | Action::End))
            .map_or("host", |l| l.actor.as_str())
    }
}
