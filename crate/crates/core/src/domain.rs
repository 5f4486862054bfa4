//! Shared domain types. Every type here is an immutable value; constructors
//! and deserializers reject anything that would violate an invariant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ValidationError};

pub const TITLE_MAX_CHARS: usize = 200;
pub const COMMENT_MAX_CHARS: usize = 2000;
pub const HASHTAG_LEN: usize = 6;
/// Lowercase letters and digits minus the glyphs that read alike out loud
/// or on a projector: `0`, `1`, `l`, `o`.
pub const HASHTAG_ALPHABET: &[u8; 32] = b"abcdefghijkmnpqrstuvwxyz23456789";

macro_rules! hex_bytes_newtype {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name([u8; $len]);

        impl $name {
            pub const fn from_bytes(bytes: [u8; $len]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self> {
                let mut out = [0u8; $len];
                hex::decode_to_slice(s, &mut out)
                    .map_err(|_| ValidationError::Hex { expected: $len })?;
                Ok(Self(out))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_bytes_newtype!(
    /// 128-bit per-meeting anonymization key.
    Salt,
    16
);
hex_bytes_newtype!(
    /// Anonymous attendee token, derived from the meeting salt and an email.
    AttendeeId,
    16
);

/// Opaque meeting identifier. Restricted to `[0-9a-z]` so it can name a
/// directory on any filesystem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MeetingId(String);

impl MeetingId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let ok = !id.is_empty()
            && id.len() <= 64
            && id.bytes().all(|b| b.is_ascii_digit() || b.is_ascii_lowercase());
        if ok {
            Ok(Self(id))
        } else {
            Err(ValidationError::MeetingId(id))
        }
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(hex::encode(bytes))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for MeetingId {
    type Error = ValidationError;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<MeetingId> for String {
    fn from(id: MeetingId) -> String {
        id.0
    }
}

impl fmt::Display for MeetingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Six-character join code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Hashtag(String);

impl Hashtag {
    pub fn new(code: impl Into<String>) -> Result<Self> {
        let code = code.into();
        let ok = code.len() == HASHTAG_LEN && code.bytes().all(|b| HASHTAG_ALPHABET.contains(&b));
        if ok {
            Ok(Self(code))
        } else {
            Err(ValidationError::Hashtag(code))
        }
    }

    /// Builds a code from six 5-bit draws (any byte, low bits used).
    pub fn from_draws(draws: [u8; HASHTAG_LEN]) -> Self {
        let code = draws
            .iter()
            .map(|d| HASHTAG_ALPHABET[(d & 0x1f) as usize] as char)
            .collect();
        Self(code)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Hashtag {
    type Error = ValidationError;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<Hashtag> for String {
    fn from(h: Hashtag) -> String {
        h.0
    }
}

impl fmt::Display for Hashtag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeetingState {
    Created,
    Live,
    Ended,
}

impl MeetingState {
    pub fn as_str(self) -> &'static str {
        match self {
            MeetingState::Created => "created",
            MeetingState::Live => "live",
            MeetingState::Ended => "ended",
        }
    }
}

/// One meeting's lifecycle record. Fields are private; state only moves
/// through [`MeetingSession::start`] and [`MeetingSession::end`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MeetingSessionRecord")]
pub struct MeetingSession {
    meeting_id: MeetingId,
    hashtag: Hashtag,
    title: String,
    host_id: String,
    recording_enabled: bool,
    salt: Salt,
    state: MeetingState,
    started_at: Option<u64>,
    ended_at: Option<u64>,
}

#[derive(Deserialize)]
struct MeetingSessionRecord {
    meeting_id: MeetingId,
    hashtag: Hashtag,
    title: String,
    host_id: String,
    recording_enabled: bool,
    salt: Salt,
    state: MeetingState,
    started_at: Option<u64>,
    ended_at: Option<u64>,
}

impl TryFrom<MeetingSessionRecord> for MeetingSession {
    type Error = ValidationError;

    fn try_from(r: MeetingSessionRecord) -> Result<Self> {
        validate_title(&r.title)?;
        let stamps_ok = match r.state {
            MeetingState::Created => r.started_at.is_none() && r.ended_at.is_none(),
            MeetingState::Live => r.started_at.is_some() && r.ended_at.is_none(),
            MeetingState::Ended => matches!((r.started_at, r.ended_at), (Some(s), Some(e)) if e >= s),
        };
        if !stamps_ok {
            return Err(ValidationError::Inconsistent("meeting timestamps for state"));
        }
        Ok(Self {
            meeting_id: r.meeting_id,
            hashtag: r.hashtag,
            title: r.title,
            host_id: r.host_id,
            recording_enabled: r.recording_enabled,
            salt: r.salt,
            state: r.state,
            started_at: r.started_at,
            ended_at: r.ended_at,
        })
    }
}

fn validate_title(title: &str) -> Result<()> {
    let n = title.chars().count();
    if title.trim().is_empty() || n > TITLE_MAX_CHARS {
        return Err(ValidationError::Title(n));
    }
    Ok(())
}

impl MeetingSession {
    pub fn new(
        meeting_id: MeetingId,
        hashtag: Hashtag,
        title: impl Into<String>,
        host_id: impl Into<String>,
        recording_enabled: bool,
        salt: Salt,
    ) -> Result<Self> {
        let title = title.into();
        validate_title(&title)?;
        Ok(Self {
            meeting_id,
            hashtag,
            title,
            host_id: host_id.into(),
            recording_enabled,
            salt,
            state: MeetingState::Created,
            started_at: None,
            ended_at: None,
        })
    }

    pub fn start(&self, now_ms: u64) -> Result<Self> {
        if self.state != MeetingState::Created {
            return Err(ValidationError::Transition { from: self.state.as_str(), to: "live" });
        }
        Ok(Self { state: MeetingState::Live, started_at: Some(now_ms), ..self.clone() })
    }

    /// Clamps `now_ms` up to `started_at` so the end stamp never precedes the start.
    pub fn end(&self, now_ms: u64) -> Result<Self> {
        let started = match (self.state, self.started_at) {
            (MeetingState::Live, Some(s)) => s,
            _ => return Err(ValidationError::Transition { from: self.state.as_str(), to: "ended" }),
        };
        Ok(Self { state: MeetingState::Ended, ended_at: Some(now_ms.max(started)), ..self.clone() })
    }

    pub fn meeting_id(&self) -> &MeetingId {
        &self.meeting_id
    }
    pub fn hashtag(&self) -> &Hashtag {
        &self.hashtag
    }
    pub fn title(&self) -> &str {
        &self.title
    }
    pub fn host_id(&self) -> &str {
        &self.host_id
    }
    pub fn recording_enabled(&self) -> bool {
        self.recording_enabled
    }
    pub fn salt(&self) -> &Salt {
        &self.salt
    }
    pub fn state(&self) -> MeetingState {
        self.state
    }
    pub fn started_at(&self) -> Option<u64> {
        self.started_at
    }
    pub fn ended_at(&self) -> Option<u64> {
        self.ended_at
    }

    /// Milliseconds from start to end, once ended.
    pub fn duration_ms(&self) -> Option<u64> {
        Some(self.ended_at? - self.started_at?)
    }

    /// Meeting-relative time of a wall-clock instant; 0 before the meeting starts.
    pub fn relative_ms(&self, now_ms: u64) -> u64 {
        self.started_at.map_or(0, |s| now_ms.saturating_sub(s))
    }

    pub fn view(&self) -> MeetingView {
        MeetingView {
            meeting_id: self.meeting_id.clone(),
            hashtag: self.hashtag.clone(),
            title: self.title.clone(),
            host_id: self.host_id.clone(),
            recording_enabled: self.recording_enabled,
            state: self.state,
            started_at: self.started_at,
            ended_at: self.ended_at,
        }
    }
}

/// The externally visible part of a [`MeetingSession`]; the salt never
/// leaves the server because it would let anyone re-derive attendee ids
/// from guessed addresses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingView {
    pub meeting_id: MeetingId,
    pub hashtag: Hashtag,
    pub title: String,
    pub host_id: String,
    pub recording_enabled: bool,
    pub state: MeetingState,
    pub started_at: Option<u64>,
    pub ended_at: Option<u64>,
}

/// When an attendee first joined, in meeting-relative milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinRecord {
    pub attendee: AttendeeId,
    pub at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReactionKind {
    Like,
    Clarify,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CommentId(String);

impl CommentId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.len() > 64 {
            return Err(ValidationError::CommentId(id));
        }
        Ok(Self(id))
    }

    /// The id assigned to the comment accepted with sequence number `seq`.
    pub fn for_seq(seq: u64) -> Self {
        Self(format!("c{seq}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CommentId {
    type Error = ValidationError;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<CommentId> for String {
    fn from(c: CommentId) -> String {
        c.0
    }
}

impl fmt::Display for CommentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Comment body of 1..=2000 Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CommentText(String);

impl CommentText {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let n = text.chars().count();
        if n == 0 || n > COMMENT_MAX_CHARS {
            return Err(ValidationError::CommentText(n));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CommentText {
    type Error = ValidationError;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<CommentText> for String {
    fn from(c: CommentText) -> String {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "lowercase")]
pub enum Payload {
    Reaction { kind: ReactionKind },
    Comment { comment_id: CommentId, text: CommentText },
    Upvote { comment_id: CommentId },
}

impl Payload {
    pub fn type_name(&self) -> &'static str {
        match self {
            Payload::Reaction { .. } => "reaction",
            Payload::Comment { .. } => "comment",
            Payload::Upvote { .. } => "upvote",
        }
    }
}

/// One accepted, anonymized interaction. Log line shape:
/// `{"seq":N,"ts_ms":N,"attendee":"hex","type":"...","payload":{...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EventRecord")]
pub struct Event {
    seq: u64,
    ts_ms: u64,
    attendee: AttendeeId,
    #[serde(flatten)]
    payload: Payload,
}

#[derive(Deserialize)]
struct EventRecord {
    seq: u64,
    ts_ms: u64,
    attendee: AttendeeId,
    #[serde(flatten)]
    payload: Payload,
}

impl TryFrom<EventRecord> for Event {
    type Error = ValidationError;
    fn try_from(r: EventRecord) -> Result<Self> {
        Event::new(r.seq, r.ts_ms, r.attendee, r.payload)
    }
}

impl Event {
    pub fn new(seq: u64, ts_ms: u64, attendee: AttendeeId, payload: Payload) -> Result<Self> {
        if seq == 0 {
            return Err(ValidationError::ZeroSeq);
        }
        Ok(Self { seq, ts_ms, attendee, payload })
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }
    pub fn ts_ms(&self) -> u64 {
        self.ts_ms
    }
    pub fn attendee(&self) -> AttendeeId {
        self.attendee
    }
    pub fn payload(&self) -> &Payload {
        &self.payload
    }
}

/// Checks the log-level invariants of an ordered event list: contiguous
/// seq from 1, non-decreasing timestamps, upvotes referencing earlier comments.
pub fn validate_event_log(events: &[Event]) -> Result<()> {
    let mut comments = std::collections::HashSet::new();
    let mut last_ts = 0;
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 + 1 {
            return Err(ValidationError::Inconsistent("event seq not contiguous from 1"));
        }
        if e.ts_ms < last_ts {
            return Err(ValidationError::Inconsistent("event timestamps decrease"));
        }
        last_ts = e.ts_ms;
        match &e.payload {
            Payload::Comment { comment_id, .. } => {
                if !comments.insert(comment_id) {
                    return Err(ValidationError::Inconsistent("duplicate comment id"));
                }
            }
            Payload::Upvote { comment_id } if !comments.contains(comment_id) => {
                return Err(ValidationError::Inconsistent("upvote of unknown comment"));
            }
            _ => {}
        }
    }
    Ok(())
}

/// 8-bit RGB triple, serialized as `[r, g, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expression {
    Happy,
    Neutral,
    Thinking,
}

/// One attendee's face in the cloud. Build with
/// [`crate::mood::emoji_state`]; deserialization re-checks every derived field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmojiRecord")]
pub struct EmojiState {
    pub attendee: AttendeeId,
    pub like_count: u64,
    pub clarify_count: u64,
    pub comment_count: u64,
    pub mood: f64,
    pub color: Rgb,
    pub size_scale: f64,
    pub expression: Expression,
}

#[derive(Deserialize)]
struct EmojiRecord {
    attendee: AttendeeId,
    like_count: u64,
    clarify_count: u64,
    comment_count: u64,
    mood: f64,
    color: Rgb,
    size_scale: f64,
    expression: Expression,
}

impl TryFrom<EmojiRecord> for EmojiState {
    type Error = ValidationError;
    fn try_from(r: EmojiRecord) -> Result<Self> {
        let s = EmojiState {
            attendee: r.attendee,
            like_count: r.like_count,
            clarify_count: r.clarify_count,
            comment_count: r.comment_count,
            mood: r.mood,
            color: r.color,
            size_scale: r.size_scale,
            expression: r.expression,
        };
        s.validate()?;
        Ok(s)
    }
}

impl EmojiState {
    pub fn validate(&self) -> Result<()> {
        let expected = crate::mood::emoji_state(
            self.attendee,
            self.like_count,
            self.clarify_count,
            self.comment_count,
        );
        if expected.mood.to_bits() != self.mood.to_bits() {
            return Err(ValidationError::Inconsistent("emoji mood"));
        }
        if expected.size_scale.to_bits() != self.size_scale.to_bits() {
            return Err(ValidationError::Inconsistent("emoji size_scale"));
        }
        if expected.color != self.color {
            return Err(ValidationError::Inconsistent("emoji color"));
        }
        if expected.expression != self.expression {
            return Err(ValidationError::Inconsistent("emoji expression"));
        }
        Ok(())
    }
}

/// Whole-room state at a time horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CloudRecord")]
pub struct CloudState {
    pub meeting_id: MeetingId,
    pub version: u64,
    pub at_ms: u64,
    pub emojis: Vec<EmojiState>,
    pub recording: bool,
}

#[derive(Deserialize)]
struct CloudRecord {
    meeting_id: MeetingId,
    version: u64,
    at_ms: u64,
    emojis: Vec<EmojiState>,
    recording: bool,
}

impl TryFrom<CloudRecord> for CloudState {
    type Error = ValidationError;
    fn try_from(r: CloudRecord) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if !r.emojis.iter().all(|e| seen.insert(e.attendee)) {
            return Err(ValidationError::Inconsistent("duplicate attendee in cloud"));
        }
        Ok(CloudState {
            meeting_id: r.meeting_id,
            version: r.version,
            at_ms: r.at_ms,
            emojis: r.emojis,
            recording: r.recording,
        })
    }
}

impl CloudState {
    pub fn total_reactions(&self) -> u64 {
        self.emojis.iter().map(|e| e.like_count + e.clarify_count).sum()
    }
}

/// Engagement weights for reactions, comments and upvotes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementWeights {
    pub reaction: f64,
    pub comment: f64,
    pub upvote: f64,
}

impl Default for EngagementWeights {
    fn default() -> Self {
        Self { reaction: 1.0, comment: 1.0, upvote: 0.0 }
    }
}

/// How raw bucket engagement is scaled into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Divide by the busiest bucket.
    #[default]
    Max,
    /// Divide by the meeting total.
    Total,
}

/// Parameters of the timeline and snippet pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SnippetConfigRecord")]
pub struct SnippetConfig {
    bucket_s: u32,
    threshold: f64,
    weights: EngagementWeights,
    pad_s: u32,
    #[serde(default)]
    normalization: Normalization,
}

#[derive(Deserialize)]
struct SnippetConfigRecord {
    bucket_s: u32,
    threshold: f64,
    weights: EngagementWeights,
    pad_s: u32,
    #[serde(default)]
    normalization: Normalization,
}

impl TryFrom<SnippetConfigRecord> for SnippetConfig {
    type Error = ValidationError;
    fn try_from(r: SnippetConfigRecord) -> Result<Self> {
        SnippetConfig::new(r.bucket_s, r.threshold, r.weights, r.pad_s)
            .map(|c| c.with_normalization(r.normalization))
    }
}

impl Default for SnippetConfig {
    fn default() -> Self {
        Self {
            bucket_s: 60,
            threshold: 0.3,
            weights: EngagementWeights::default(),
            pad_s: 0,
            normalization: Normalization::Max,
        }
    }
}

impl SnippetConfig {
    pub fn new(bucket_s: u32, threshold: f64, weights: EngagementWeights, pad_s: u32) -> Result<Self> {
        if bucket_s == 0 {
            return Err(ValidationError::Config("bucket_s must be positive"));
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(ValidationError::Config("threshold must lie in (0, 1]"));
        }
        let w = [weights.reaction, weights.comment, weights.upvote];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ValidationError::Config("weights must be finite and non-negative"));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(ValidationError::Config("weights must not all be zero"));
        }
        Ok(Self { bucket_s, threshold, weights, pad_s, normalization: Normalization::Max })
    }

    pub fn with_normalization(self, normalization: Normalization) -> Self {
        Self { normalization, ..self }
    }

    pub fn bucket_s(&self) -> u32 {
        self.bucket_s
    }
    pub fn bucket_ms(&self) -> u64 {
        u64::from(self.bucket_s) * 1000
    }
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    pub fn weights(&self) -> EngagementWeights {
        self.weights
    }
    pub fn pad_s(&self) -> u32 {
        self.pad_s
    }
    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

/// One slice of the engagement timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineBucket {
    pub index: u64,
    pub start_s: u64,
    pub reactions: u64,
    pub comments: u64,
    pub upvotes: u64,
    pub raw: f64,
    pub norm: f64,
}

/// A cut high-engagement interval. `path` is relative to the data directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AudioSnippetRecord")]
pub struct AudioSnippet {
    pub meeting_id: MeetingId,
    pub start_s: f64,
    pub end_s: f64,
    pub path: String,
    pub peak_norm: f64,
}

#[derive(Deserialize)]
struct AudioSnippetRecord {
    meeting_id: MeetingId,
    start_s: f64,
    end_s: f64,
    path: String,
    peak_norm: f64,
}

impl TryFrom<AudioSnippetRecord> for AudioSnippet {
    type Error = ValidationError;
    fn try_from(r: AudioSnippetRecord) -> Result<Self> {
        if !(r.end_s > r.start_s && r.start_s >= 0.0) {
            return Err(ValidationError::Inconsistent("snippet bounds"));
        }
        Ok(AudioSnippet {
            meeting_id: r.meeting_id,
            start_s: r.start_s,
            end_s: r.end_s,
            path: r.path,
            peak_norm: r.peak_norm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommentOrder {
    Chrono,
    Popularity,
}

/// A comment as listed to clients, with its current upvote count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentEntry {
    pub comment_id: CommentId,
    pub seq: u64,
    pub ts_ms: u64,
    pub text: CommentText,
    pub upvotes: u64,
}

/// Sort key for popularity order: most upvotes first, then earliest seq.
pub fn popularity_key(c: &CommentEntry) -> (std::cmp::Reverse<u64>, u64) {
    (std::cmp::Reverse(c.upvotes), c.seq)
}

/// Post-meeting report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SummaryRecord")]
pub struct SummaryReport {
    pub meeting: MeetingView,
    pub attendee_count: u64,
    pub cloud: CloudState,
    pub timeline: Vec<TimelineBucket>,
    pub snippets: Vec<AudioSnippet>,
    pub comments_chrono: Vec<CommentEntry>,
    pub comments_popular: Vec<CommentEntry>,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct SummaryRecord {
    meeting: MeetingView,
    attendee_count: u64,
    cloud: CloudState,
    timeline: Vec<TimelineBucket>,
    snippets: Vec<AudioSnippet>,
    comments_chrono: Vec<CommentEntry>,
    comments_popular: Vec<CommentEntry>,
    #[serde(default)]
    warnings: Vec<String>,
}

impl TryFrom<SummaryRecord> for SummaryReport {
    type Error = ValidationError;
    fn try_from(r: SummaryRecord) -> Result<Self> {
        let report = SummaryReport {
            meeting: r.meeting,
            attendee_count: r.attendee_count,
            cloud: r.cloud,
            timeline: r.timeline,
            snippets: r.snippets,
            comments_chrono: r.comments_chrono,
            comments_popular: r.comments_popular,
            warnings: r.warnings,
        };
        report.validate()?;
        Ok(report)
    }
}

impl SummaryReport {
    pub fn validate(&self) -> Result<()> {
        if !self.comments_chrono.windows(2).all(|w| w[0].seq < w[1].seq) {
            return Err(ValidationError::Inconsistent("chronological comment order"));
        }
        let popular_sorted = self
            .comments_popular
            .windows(2)
            .all(|w| popularity_key(&w[0]) < popularity_key(&w[1]));
        if !popular_sorted {
            return Err(ValidationError::Inconsistent("popularity comment order"));
        }
        let mut a: Vec<_> = self.comments_chrono.iter().collect();
        let mut b: Vec<_> = self.comments_popular.iter().collect();
        a.sort_by_key(|c| c.seq);
        b.sort_by_key(|c| c.seq);
        if a != b {
            return Err(ValidationError::Inconsistent("comment lists differ"));
        }
        if !self.snippets.windows(2).all(|w| w[0].end_s <= w[1].start_s) {
            return Err(ValidationError::Inconsistent("snippets overlap or unsorted"));
        }
        if self.attendee_count != self.cloud.emojis.len() as u64 {
            return Err(ValidationError::Inconsistent("attendee_count"));
        }
        Ok(())
    }
}
