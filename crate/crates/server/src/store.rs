//! Append-only persistence. The file layout under a data directory:
//!
//! ```text
//! meetings.ndjson                 meeting records, last record per id wins
//! grants.ndjson                   hashed bearer tokens
//! <meeting_id>/events.ndjson      one event per line, seq 1..N
//! <meeting_id>/joins.ndjson       first join of each attendee
//! <meeting_id>/recording.wav      latest uploaded recording
//! <meeting_id>/recording.json     recording alignment
//! <meeting_id>/summary.json       generated report
//! <meeting_id>/snippets/*.wav     cut snippets
//! ```
//!
//! A line without its terminating newline was never acknowledged; readers
//! drop it with a warning and the writer truncates it before appending.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use meetcues_core::{Event, JoinRecord, MeetingId, MeetingSession};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage I/O: {0}")]
    Io(#[from] io::Error),
    #[error("{file}: corrupt line {line}: {reason}")]
    Corruption { file: String, line: usize, reason: String },
    #[error("append out of sequence: expected seq {expected}, got {got}")]
    OutOfSequence { expected: u64, got: u64 },
}

/// Events read back from a log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Replay {
    pub events: Vec<Event>,
    /// A trailing unterminated line was discarded.
    pub torn_tail: bool,
}

/// Alignment of an uploaded recording with the meeting clock.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub offset_ms: u64,
}

/// Persisted bearer-token grant. Only the SHA-256 of the token is stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantRecord {
    pub token_sha256: String,
    pub meeting_id: MeetingId,
    pub attendee: Option<meetcues_core::AttendeeId>,
    pub issued_at: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Durability {
    /// Hand each line to the OS before acknowledging; survives process death.
    #[default]
    Flush,
    /// Additionally fsync; survives power loss.
    Sync,
}

/// Storage behind the services. [`FileStore`] is the system of record;
/// [`MemoryStore`] backs offline simulation and tests.
pub trait Storage: Send + Sync {
    /// Appends `event`, which must carry the next sequence number.
    fn append(&self, meeting: &MeetingId, event: &Event) -> Result<u64, StoreError>;
    fn replay(&self, meeting: &MeetingId) -> Result<Replay, StoreError>;
    fn append_join(&self, meeting: &MeetingId, join: &JoinRecord) -> Result<(), StoreError>;
    fn load_joins(&self, meeting: &MeetingId) -> Result<Vec<JoinRecord>, StoreError>;
    fn save_meeting(&self, session: &MeetingSession) -> Result<(), StoreError>;
    fn load_meetings(&self) -> Result<Vec<MeetingSession>, StoreError>;
    fn save_grant(&self, grant: &GrantRecord) -> Result<(), StoreError>;
    fn load_grants(&self) -> Result<Vec<GrantRecord>, StoreError>;
    fn write_recording(&self, meeting: &MeetingId, wav: &[u8], meta: RecordingMeta) -> Result<(), StoreError>;
    fn read_recording(&self, meeting: &MeetingId) -> Result<Option<(Vec<u8>, RecordingMeta)>, StoreError>;
    /// Replaces every snippet of the meeting with `files` (paths relative to the data dir).
    fn write_snippets(&self, meeting: &MeetingId, files: &[(String, Vec<u8>)]) -> Result<(), StoreError>;
    fn read_snippet(&self, path: &str) -> Result<Option<Vec<u8>>, StoreError>;
    fn write_summary(&self, meeting: &MeetingId, json: &[u8]) -> Result<(), StoreError>;
    fn read_summary(&self, meeting: &MeetingId) -> Result<Option<Vec<u8>>, StoreError>;
}

/// Splits NDJSON into parsed records. An unterminated final line is
/// reported as torn and skipped; any other unparsable line is corruption.
fn parse_lines<T: DeserializeOwned>(file: &str, bytes: &[u8]) -> Result<(Vec<T>, bool), StoreError> {
    let mut out = Vec::new();
    let complete = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(i) => &bytes[..=i],
        None => &bytes[..0],
    };
    let torn = complete.len() < bytes.len();
    for (i, line) in complete.split(|&b| b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_slice(line).map_err(|e| StoreError::Corruption {
            file: file.to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    if torn {
        tracing::warn!(file, "discarding unterminated final line");
    }
    Ok((out, torn))
}

fn check_contiguous(file: &str, events: &[Event]) -> Result<(), StoreError> {
    for (i, e) in events.iter().enumerate() {
        if e.seq() != i as u64 + 1 {
            return Err(StoreError::Corruption {
                file: file.to_string(),
                line: i + 1,
                reason: format!("expected seq {}, found {}", i + 1, e.seq()),
            });
        }
    }
    Ok(())
}

fn to_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(value).expect("domain types always serialize");
    line.push(b'\n');
    line
}

struct LogWriter {
    file: File,
    last_seq: u64,
}

pub struct FileStore {
    root: PathBuf,
    durability: Durability,
    writers: Mutex<HashMap<MeetingId, Arc<Mutex<Option<LogWriter>>>>>,
    // serializes appends to the shared metadata files
    meta_lock: Mutex<()>,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>, durability: Durability) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, durability, writers: Mutex::new(HashMap::new()), meta_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn meeting_dir(&self, meeting: &MeetingId) -> PathBuf {
        self.root.join(meeting.as_str())
    }

    pub fn events_path(&self, meeting: &MeetingId) -> PathBuf {
        self.meeting_dir(meeting).join("events.ndjson")
    }

    fn read_optional(path: &Path) -> Result<Option<Vec<u8>>, StoreError> {
        match fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn read_ndjson<T: DeserializeOwned>(&self, path: &Path) -> Result<(Vec<T>, bool), StoreError> {
        let bytes = Self::read_optional(path)?.unwrap_or_default();
        parse_lines(&path.display().to_string(), &bytes)
    }

    /// Opens `path` for appending after cutting any unterminated tail.
    fn open_append(path: &Path) -> Result<File, StoreError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
        let bytes = fs::read(path)?;
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if keep < bytes.len() {
            tracing::warn!(path = %path.display(), "truncating unterminated final line before append");
            file.set_len(keep as u64)?;
        }
        Ok(file)
    }

    fn write_line(&self, file: &mut File, line: &[u8]) -> io::Result<()> {
        file.write_all(line)?;
        file.flush()?;
        if self.durability == Durability::Sync {
            file.sync_data()?;
        }
        Ok(())
    }

    fn append_record<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), StoreError> {
        let _guard = self.meta_lock.lock();
        let mut file = Self::open_append(path)?;
        self.write_line(&mut file, &to_line(value))?;
        Ok(())
    }

    /// Writes via a temporary file and rename so readers never see a partial blob.
    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    fn resolve(&self, relative: &str) -> Option<PathBuf> {
        let p = Path::new(relative);
        let safe = p.components().all(|c| matches!(c, std::path::Component::Normal(_)));
        safe.then(|| self.root.join(p))
    }
}

impl Storage for FileStore {
    fn append(&self, meeting: &MeetingId, event: &Event) -> Result<u64, StoreError> {
        let slot = self.writers.lock().entry(meeting.clone()).or_default().clone();
        let mut slot = slot.lock();
        if slot.is_none() {
            let file = Self::open_append(&self.events_path(meeting))?;
            let last_seq = self.replay(meeting)?.events.last().map_or(0, Event::seq);
            *slot = Some(LogWriter { file, last_seq });
        }
        let writer = slot.as_mut().expect("opened above");
        if event.seq() != writer.last_seq + 1 {
            return Err(StoreError::OutOfSequence { expected: writer.last_seq + 1, got: event.seq() });
        }
        if let Err(e) = self.write_line(&mut writer.file, &to_line(event)) {
            // the line may be half written; reopening repairs the tail
            *slot = None;
            return Err(e.into());
        }
        writer.last_seq = event.seq();
        Ok(event.seq())
    }

    fn replay(&self, meeting: &MeetingId) -> Result<Replay, StoreError> {
        let path = self.events_path(meeting);
        let (events, torn_tail) = self.read_ndjson::<Event>(&path)?;
        check_contiguous(&path.display().to_string(), &events)?;
        Ok(Replay { events, torn_tail })
    }

    fn append_join(&self, meeting: &MeetingId, join: &JoinRecord) -> Result<(), StoreError> {
        self.append_record(&self.meeting_dir(meeting).join("joins.ndjson"), join)
    }

    fn load_joins(&self, meeting: &MeetingId) -> Result<Vec<JoinRecord>, StoreError> {
        Ok(self.read_ndjson(&self.meeting_dir(meeting).join("joins.ndjson"))?.0)
    }

    fn save_meeting(&self, session: &MeetingSession) -> Result<(), StoreError> {
        self.append_record(&self.root.join("meetings.ndjson"), session)
    }

    fn load_meetings(&self) -> Result<Vec<MeetingSession>, StoreError> {
        let (records, _) = self.read_ndjson::<MeetingSession>(&self.root.join("meetings.ndjson"))?;
        Ok(last_per_id(records))
    }

    fn save_grant(&self, grant: &GrantRecord) -> Result<(), StoreError> {
        self.append_record(&self.root.join("grants.ndjson"), grant)
    }

    fn load_grants(&self) -> Result<Vec<GrantRecord>, StoreError> {
        Ok(self.read_ndjson(&self.root.join("grants.ndjson"))?.0)
    }

    fn write_recording(&self, meeting: &MeetingId, wav: &[u8], meta: RecordingMeta) -> Result<(), StoreError> {
        let dir = self.meeting_dir(meeting);
        Self::write_atomic(&dir.join("recording.json"), &serde_json::to_vec(&meta).expect("serializable"))?;
        Self::write_atomic(&dir.join("recording.wav"), wav)
    }

    fn read_recording(&self, meeting: &MeetingId) -> Result<Option<(Vec<u8>, RecordingMeta)>, StoreError> {
        let dir = self.meeting_dir(meeting);
        let Some(wav) = Self::read_optional(&dir.join("recording.wav"))? else {
            return Ok(None);
        };
        let meta = Self::read_optional(&dir.join("recording.json"))?
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or_default();
        Ok(Some((wav, meta)))
    }

    fn write_snippets(&self, meeting: &MeetingId, files: &[(String, Vec<u8>)]) -> Result<(), StoreError> {
        let dir = self.meeting_dir(meeting).join("snippets");
        match fs::remove_dir_all(&dir) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
        fs::create_dir_all(&dir)?;
        for (path, bytes) in files {
            let full = self.resolve(path).ok_or_else(|| {
                StoreError::Io(io::Error::new(io::ErrorKind::InvalidInput, format!("bad snippet path {path}")))
            })?;
            Self::write_atomic(&full, bytes)?;
        }
        Ok(())
    }

    fn read_snippet(&self, path: &str) -> Result<Option<Vec<u8>>, StoreError> {
        match self.resolve(path) {
            Some(full) => Self::read_optional(&full),
            None => Ok(None),
        }
    }

    fn write_summary(&self, meeting: &MeetingId, json: &[u8]) -> Result<(), StoreError> {
        Self::write_atomic(&self.meeting_dir(meeting).join("summary.json"), json)
    }

    fn read_summary(&self, meeting: &MeetingId) -> Result<Option<Vec<u8>>, StoreError> {
        Self::read_optional(&self.meeting_dir(meeting).join("summary.json"))
    }
}

fn last_per_id(records: Vec<MeetingSession>) -> Vec<MeetingSession> {
    let mut order: Vec<MeetingId> = Vec::new();
    let mut latest: HashMap<MeetingId, MeetingSession> = HashMap::new();
    for r in records {
        if !latest.contains_key(r.meeting_id()) {
            order.push(r.meeting_id().clone());
        }
        latest.insert(r.meeting_id().clone(), r);
    }
    order.into_iter().map(|id| latest.remove(&id).expect("present")).collect()
}

#[derive(Default)]
struct MemoryState {
    events: HashMap<MeetingId, Vec<Event>>,
    joins: HashMap<MeetingId, Vec<JoinRecord>>,
    meetings: Vec<MeetingSession>,
    grants: Vec<GrantRecord>,
    recordings: HashMap<MeetingId, (Vec<u8>, RecordingMeta)>,
    blobs: HashMap<String, Vec<u8>>,
    summaries: HashMap<MeetingId, Vec<u8>>,
}

/// Volatile storage with the same contract as [`FileStore`].
#[derive(Default)]
pub struct MemoryStore {
    state: Mutex<MemoryState>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Storage for MemoryStore {
    fn append(&self, meeting: &MeetingId, event: &Event) -> Result<u64, StoreError> {
        let mut state = self.state.lock();
        let log = state.events.entry(meeting.clone()).or_default();
        let expected = log.len() as u64 + 1;
        if event.seq() != expected {
            return Err(StoreError::OutOfSequence { expected, got: event.seq() });
        }
        log.push(event.clone());
        Ok(event.seq())
    }

    fn replay(&self, meeting: &MeetingId) -> Result<Replay, StoreError> {
        let events = self.state.lock().events.get(meeting).cloned().unwrap_or_default();
        Ok(Replay { events, torn_tail: false })
    }

    fn append_join(&self, meeting: &MeetingId, join: &JoinRecord) -> Result<(), StoreError> {
        self.state.lock().joins.entry(meeting.clone()).or_default().push(*join);
        Ok(())
    }

    fn load_joins(&self, meeting: &MeetingId) -> Result<Vec<JoinRecord>, StoreError> {
        Ok(self.state.lock().joins.get(meeting).cloned().unwrap_or_default())
    }

    fn save_meeting(&self, session: &MeetingSession) -> Result<(), StoreError> {
        self.state.lock().meetings.push(session.clone());
        Ok(())
    }

    fn load_meetings(&self) -> Result<Vec<MeetingSession>, StoreError> {
        Ok(last_per_id(self.state.lock().meetings.clone()))
    }

    fn save_grant(&self, grant: &GrantRecord) -> Result<(), StoreError> {
        self.state.lock().grants.push(grant.clone());
        Ok(())
    }

    fn load_grants(&self) -> Result<Vec<GrantRecord>, StoreError> {
        Ok(self.state.lock().grants.clone())
    }

    fn write_recording(&self, meeting: &MeetingId, wav: &[u8], meta: RecordingMeta) -> Result<(), StoreError> {
        self.state.lock().recordings.insert(meeting.clone(), (wav.to_vec(), meta));
        Ok(())
    }

    fn read_recording(&self, meeting: &MeetingId) -> Result<Option<(Vec<u8>, RecordingMeta)>, StoreError> {
        Ok(self.state.lock().recordings.get(meeting).cloned())
    }

    fn write_snippets(&self, meeting: &MeetingId, files: &[(String, Vec<u8>)]) -> Result<(), StoreError> {
        let mut state = self.state.lock();
        let prefix = format!("{}/snippets/", meeting.as_str());
        state.blobs.retain(|k, _| !k.starts_with(&prefix));
        for (path, bytes) in files {
            state.blobs.insert(path.clone(), bytes.clone());
        }
        Ok(())
    }

    fn read_snippet(&self, path: &str) -> Result<Option<Vec<u8>>, StoreError> {
        Ok(self.state.lock().blobs.get(path).cloned())
    }

    fn write_summary(&self, meeting: &MeetingId, json: &[u8]) -> Result<(), StoreError> {
        self.state.lock().summaries.insert(meeting.clone(), json.to_vec());
        Ok(())
    }

    fn read_summary(&self, meeting: &MeetingId) -> Result<Option<Vec<u8>>, StoreError> {
        Ok(self.state.lock().summaries.get(meeting).cloned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use meetcues_core::{AttendeeId, Hashtag, Payload, ReactionKind, Salt};

    fn like(seq: u64) -> Event {
        Event::new(seq, seq * 100, AttendeeId::from_bytes([1; 16]), Payload::Reaction { kind: ReactionKind::Like })
            .unwrap()
    }

    fn mid() -> MeetingId {
        MeetingId::new("abc").unwrap()
    }

    fn line_count(store: &FileStore) -> usize {
        fs::read_to_string(store.events_path(&mid())).unwrap().lines().count()
    }

    #[test]
    fn append_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path(), Durability::Flush).unwrap();
        assert_eq!(store.replay(&mid()).unwrap(), Replay::default());
        assert_eq!(store.append(&mid(), &like(1)).unwrap(), 1);
        assert_eq!(line_count(&store), 1);
        for seq in 2..=5 {
            store.append(&mid(), &like(seq)).unwrap();
        }
        let replay = store.replay(&mid()).unwrap();
        assert_eq!(replay.events, (1..=5).map(like).collect::<Vec<_>>());
        assert!(!replay.torn_tail);
    }

    #[test]
    fn rejects_gaps_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path(), Durability::Flush).unwrap();
        store.append(&mid(), &like(1)).unwrap();
        assert!(matches!(store.append(&mid(), &like(3)), Err(StoreError::OutOfSequence { expected: 2, got: 3 })));
        assert!(matches!(store.append(&mid(), &like(1)), Err(StoreError::OutOfSequence { .. })));
        assert_eq!(line_count(&store), 1);
    }

    #[test]
    fn torn_tail_is_dropped_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = FileStore::open(dir.path(), Durability::Flush).unwrap();
            for seq in 1..=3 {
                store.append(&mid(), &like(seq)).unwrap();
            }
        }
        let path = dir.path().join("abc/events.ndjson");
        let mut bytes = fs::read(&path).unwrap();
        let cut = bytes.len() - 10;
        bytes.truncate(cut);
        fs::write(&path, &bytes).unwrap();

        let store = FileStore::open(dir.path(), Durability::Flush).unwrap();
        let replay = store.replay(&mid()).unwrap();
        assert_eq!(replay.events.len(), 2);
        assert!(replay.torn_tail);
        // next append continues after the surviving prefix
        store.append(&mid(), &like(3)).unwrap();
        let replay = store.replay(&mid()).unwrap();
        assert_eq!(replay.events.len(), 3);
        assert!(!replay.torn_tail);
    }

    #[test]
    fn mid_file_corruption_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path(), Durability::Flush).unwrap();
        for seq in 1..=3 {
            store.append(&mid(), &like(seq)).unwrap();
        }
        let path = store.events_path(&mid());
        let text = fs::read_to_string(&path).unwrap().replacen("\"seq\":2", "\"seq\":x", 1);
        fs::write(&path, text).unwrap();
        match FileStore::open(dir.path(), Durability::Flush).unwrap().replay(&mid()) {
            Err(StoreError::Corruption { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corruption, got {other:?}"),
        }
    }

    #[test]
    fn meeting_records_upsert() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path(), Durability::Sync).unwrap();
        assert!(store.load_meetings().unwrap().is_empty());
        let s = MeetingSession::new(mid(), Hashtag::new("abc234").unwrap(), "T", "h", true, Salt::from_bytes([3; 16]))
            .unwrap();
        store.save_meeting(&s).unwrap();
        assert_eq!(store.load_meetings().unwrap(), vec![s.clone()]);
        let live = s.start(10).unwrap();
        store.save_meeting(&live).unwrap();
        assert_eq!(store.load_meetings().unwrap(), vec![live]);
    }

    #[test]
    fn snippets_are_replaced_wholesale() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path(), Durability::Flush).unwrap();
        store.write_snippets(&mid(), &[("abc/snippets/0_0-60.wav".into(), vec![1, 2])]).unwrap();
        store.write_snippets(&mid(), &[("abc/snippets/0_60-120.wav".into(), vec![3])]).unwrap();
        assert_eq!(store.read_snippet("abc/snippets/0_0-60.wav").unwrap(), None);
        assert_eq!(store.read_snippet("abc/snippets/0_60-120.wav").unwrap(), Some(vec![3]));
        assert_eq!(store.read_snippet("../etc/passwd").unwrap(), None);
    }

    #[test]
    fn memory_store_enforces_sequence() {
        let store = MemoryStore::new();
        store.append(&mid(), &like(1)).unwrap();
        assert!(store.append(&mid(), &like(3)).is_err());
        assert_eq!(store.replay(&mid()).unwrap().events.len(), 1);
    }
}
