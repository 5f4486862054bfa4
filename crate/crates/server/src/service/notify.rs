//! Summary notifications. Recipient addresses live only here, in their own
//! files, apart from the event data.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::PathBuf;

use meetcues_core::anon::normalize_email;
use meetcues_core::MeetingId;
use parking_lot::Mutex;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Outcome of one delivery attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryRecord {
    pub recipient: String,
    /// Where the message went (file path for the outbox transport).
    pub location: Option<String>,
    pub error: Option<String>,
}

impl DeliveryRecord {
    pub fn delivered(&self) -> bool {
        self.error.is_none()
    }
}

pub trait Notifier: Send + Sync {
    /// Remembers an address for the meeting's summary notification.
    fn register(&self, meeting: &MeetingId, email: &str);
    /// Sends the summary link to every registered address. Never fails as a
    /// whole; per-recipient failures are in the records.
    fn notify(&self, meeting: &MeetingId, title: &str, link: &str) -> Vec<DeliveryRecord>;
}

/// Keeps nothing and sends nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullNotifier;

impl Notifier for NullNotifier {
    fn register(&self, _: &MeetingId, _: &str) {}
    fn notify(&self, _: &MeetingId, _: &str, _: &str) -> Vec<DeliveryRecord> {
        Vec::new()
    }
}

/// Transport for one rendered message; returns where it was delivered.
pub trait Deliver: Send + Sync {
    fn deliver(&self, meeting: &MeetingId, to: &str, message: &str) -> io::Result<String>;
}

/// Writes each message to `<root>/<meeting_id>/outbox/<hash>.eml`.
#[derive(Debug, Clone)]
pub struct FileOutbox {
    root: PathBuf,
}

impl FileOutbox {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

fn address_key(email: &str) -> String {
    hex::encode(&Sha256::digest(email.as_bytes())[..8])
}

impl Deliver for FileOutbox {
    fn deliver(&self, meeting: &MeetingId, to: &str, message: &str) -> io::Result<String> {
        let dir = self.root.join(meeting.as_str()).join("outbox");
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{}.eml", address_key(to)));
        fs::write(&path, message)?;
        Ok(path.display().to_string())
    }
}

/// Renders link messages and hands them to a [`Deliver`] transport.
/// Addresses are kept in memory and, when `spool` is set, appended to
/// `<spool>/<meeting_id>.txt` so they survive restarts.
pub struct MailNotifier<T> {
    transport: T,
    spool: Option<PathBuf>,
    recipients: Mutex<HashMap<MeetingId, BTreeSet<String>>>,
}

impl<T: Deliver> MailNotifier<T> {
    pub fn new(transport: T, spool: Option<PathBuf>) -> Self {
        Self { transport, spool, recipients: Mutex::new(HashMap::new()) }
    }

    fn spool_file(&self, meeting: &MeetingId) -> Option<PathBuf> {
        self.spool.as_ref().map(|d| d.join(format!("{meeting}.txt")))
    }

    fn load(&self, meeting: &MeetingId) -> BTreeSet<String> {
        let Some(path) = self.spool_file(meeting) else { return BTreeSet::new() };
        match fs::read_to_string(&path) {
            Ok(text) => text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect(),
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeSet::new(),
            Err(e) => {
                tracing::warn!(%meeting, error = %e, "cannot read notification spool");
                BTreeSet::new()
            }
        }
    }

    fn persist(&self, meeting: &MeetingId, email: &str) -> io::Result<()> {
        let Some(path) = self.spool_file(meeting) else { return Ok(()) };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(file, "{email}")
    }

    pub fn recipients(&self, meeting: &MeetingId) -> BTreeSet<String> {
        let mut map = self.recipients.lock();
        map.entry(meeting.clone()).or_insert_with(|| self.load(meeting)).clone()
    }
}

fn render_message(to: &str, title: &str, link: &str) -> String {
    let subject: String = title.chars().filter(|c| !c.is_control()).collect();
    format!(
        "To: {to}\r\nSubject: Meeting summary: {subject}\r\nContent-Type: text/plain; charset=utf-8\r\n\r\n\
         The summary of \"{subject}\" is ready:\r\n{link}\r\n"
    )
}

impl<T: Deliver> Notifier for MailNotifier<T> {
    fn register(&self, meeting: &MeetingId, email: &str) {
        let email = normalize_email(email);
        let mut map = self.recipients.lock();
        let set = map.entry(meeting.clone()).or_insert_with(|| self.load(meeting));
        if set.insert(email.clone()) {
            if let Err(e) = self.persist(meeting, &email) {
                tracing::warn!(%meeting, error = %e, "cannot spool notification address");
            }
        }
    }

    fn notify(&self, meeting: &MeetingId, title: &str, link: &str) -> Vec<DeliveryRecord> {
        self.recipients(meeting)
            .into_iter()
            .map(|to| match self.transport.deliver(meeting, &to, &render_message(&to, title, link)) {
                Ok(location) => DeliveryRecord { recipient: to, location: Some(location), error: None },
                Err(e) => {
                    tracing::warn!(%meeting, error = %e, "summary notification failed for one recipient");
                    DeliveryRecord { recipient: to, location: None, error: Some(e.to_string()) }
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meeting() -> MeetingId {
        MeetingId::new("m1").unwrap()
    }

    fn outbox_files(root: &std::path::Path) -> usize {
        fs::read_dir(root.join("m1/outbox")).map_or(0, |d| d.count())
    }

    #[test]
    fn one_file_per_recipient() {
        let dir = tempfile::tempdir().unwrap();
        let n = MailNotifier::new(FileOutbox::new(dir.path()), None);
        for i in 0..5 {
            n.register(&meeting(), &format!("p{i}@x.com"));
        }
        n.register(&meeting(), " P0@X.com ");
        let records = n.notify(&meeting(), "Standup", "http://h/summary/m1");
        assert_eq!(records.len(), 5);
        assert!(records.iter().all(DeliveryRecord::delivered));
        assert_eq!(outbox_files(dir.path()), 5);
        let body = fs::read_to_string(records[0].location.as_ref().unwrap()).unwrap();
        assert!(body.starts_with("To: p0@x.com\r\nSubject: Meeting summary: Standup\r\n"));
        assert!(body.contains("http://h/summary/m1"));
    }

    #[test]
    fn null_notifier_sends_nothing() {
        NullNotifier.register(&meeting(), "a@x.com");
        assert!(NullNotifier.notify(&meeting(), "t", "l").is_empty());
    }

    struct Flaky(FileOutbox);

    impl Deliver for Flaky {
        fn deliver(&self, meeting: &MeetingId, to: &str, message: &str) -> io::Result<String> {
            if to.starts_with("p3") {
                return Err(io::Error::other("mailbox unavailable"));
            }
            self.0.deliver(meeting, to, message)
        }
    }

    #[test]
    fn one_failure_does_not_stop_the_rest() {
        let dir = tempfile::tempdir().unwrap();
        let n = MailNotifier::new(Flaky(FileOutbox::new(dir.path())), None);
        for i in 0..5 {
            n.register(&meeting(), &format!("p{i}@x.com"));
        }
        let records = n.notify(&meeting(), "t", "l");
        assert_eq!(records.iter().filter(|r| r.delivered()).count(), 4);
        assert_eq!(records.iter().filter(|r| !r.delivered()).count(), 1);
        assert_eq!(outbox_files(dir.path()), 4);
    }

    #[test]
    fn spooled_addresses_survive_restart() {
        let dir = tempfile::tempdir().unwrap();
        let spool = dir.path().join("notifier");
        let first = MailNotifier::new(FileOutbox::new(dir.path()), Some(spool.clone()));
        first.register(&meeting(), "a@x.com");
        first.register(&meeting(), "a@x.com");
        let second = MailNotifier::new(FileOutbox::new(dir.path()), Some(spool.clone()));
        assert_eq!(second.recipients(&meeting()).into_iter().collect::<Vec<_>>(), vec!["a@x.com"]);
        assert_eq!(fs::read_to_string(spool.join("m1.txt")).unwrap(), "a@x.com\n");
    }
}
