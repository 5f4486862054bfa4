use std::fs::OpenOptions;
use std::io::Write;
use std::sync::Arc;

use meetcues_core::mood::cloud_at;
use meetcues_core::{MeetingId, ReactionKind};
use meetcues_server::service::{JobMode, NullNotifier, Service, ServiceConfig, Submission};
use meetcues_server::store::{Durability, FileStore, Storage};

fn open(dir: &std::path::Path) -> Service {
    let store = FileStore::open(dir, Durability::Flush).unwrap();
    let config = ServiceConfig { jobs: JobMode::Inline, ..Default::default() };
    Service::open(Arc::new(store), config, Arc::new(NullNotifier)).unwrap()
}

struct Meeting {
    id: MeetingId,
    host: String,
    tokens: Vec<String>,
}

fn setup(svc: &Service, attendees: usize) -> Meeting {
    let created = svc.create_meeting("host", "Retro", false, 0, Some(11)).unwrap();
    let id = created.meeting.meeting_id.clone();
    let tag = created.meeting.hashtag.as_str().to_owned();
    let tokens = (0..attendees).map(|i| svc.join_meeting(&tag, &format!("u{i}@x.org"), 0).unwrap().token).collect();
    svc.start_meeting(Some(&created.host_token), &id, 0).unwrap();
    Meeting { id, host: created.host_token, tokens }
}

fn like() -> Submission {
    Submission::Reaction { kind: ReactionKind::Like }
}

#[test]
fn restart_rebuilds_state_tokens_and_comment_board() {
    let dir = tempfile::tempdir().unwrap();
    let (m, before, comment_id) = {
        let svc = open(dir.path());
        let m = setup(&svc, 3);
        svc.submit(Some(&m.tokens[0]), &m.id, like(), 1_000).unwrap();
        let c = svc.submit(Some(&m.tokens[1]), &m.id, Submission::Comment { text: "why?".into() }, 2_000).unwrap();
        let comment_id = match c.event.payload() {
            meetcues_core::Payload::Comment { comment_id, .. } => comment_id.as_str().to_owned(),
            _ => unreachable!(),
        };
        svc.submit(Some(&m.tokens[2]), &m.id, Submission::Upvote { comment_id: comment_id.clone() }, 3_000).unwrap();
        let before = svc.state(&m.id, None).unwrap();
        (m, before, comment_id)
    };

    let svc = open(dir.path());
    assert_eq!(svc.state(&m.id, None).unwrap(), before);
    // the upvote is remembered, so repeating it does not add an event
    let again = svc.submit(Some(&m.tokens[2]), &m.id, Submission::Upvote { comment_id }, 4_000).unwrap();
    assert!(!again.created);
    let next = svc.submit(Some(&m.tokens[0]), &m.id, like(), 5_000).unwrap();
    assert_eq!(next.event.seq(), 4);
    svc.end_meeting(Some(&m.host), &m.id, 6_000).unwrap();
    let summary = svc.summary_json(&m.id).unwrap();

    // a summary lost before it reached disk is regenerated identically
    std::fs::remove_file(dir.path().join(m.id.as_str()).join("summary.json")).unwrap();
    let svc = open(dir.path());
    assert_eq!(svc.summary_json(&m.id).unwrap(), summary);
}

#[test]
fn torn_tail_is_dropped_and_the_log_continues() {
    let dir = tempfile::tempdir().unwrap();
    let m = {
        let svc = open(dir.path());
        let m = setup(&svc, 2);
        for t in 0..5 {
            svc.submit(Some(&m.tokens[(t % 2) as usize]), &m.id, like(), t * 100).unwrap();
        }
        m
    };
    let store = FileStore::open(dir.path(), Durability::Flush).unwrap();
    let mut f = OpenOptions::new().append(true).open(store.events_path(&m.id)).unwrap();
    f.write_all(br#"{"seq":6,"ts_ms":900,"attend"#).unwrap();
    drop(f);

    let svc = open(dir.path());
    let events = svc.events(&m.id).unwrap();
    assert_eq!(events.len(), 5);
    let joins = svc.joins(&m.id).unwrap();
    assert_eq!(svc.state(&m.id, None).unwrap(), cloud_at(&m.id, &events, &joins, 400, false));
    assert_eq!(svc.submit(Some(&m.tokens[0]), &m.id, like(), 1_000).unwrap().event.seq(), 6);

    let replay = FileStore::open(dir.path(), Durability::Flush).unwrap().replay(&m.id).unwrap();
    assert!(!replay.torn_tail);
    assert_eq!(replay.events.iter().map(|e| e.seq()).collect::<Vec<_>>(), [1, 2, 3, 4, 5, 6]);
}

#[test]
fn corrupt_middle_line_refuses_to_open() {
    let dir = tempfile::tempdir().unwrap();
    let m = {
        let svc = open(dir.path());
        let m = setup(&svc, 1);
        for t in 0..3 {
            svc.submit(Some(&m.tokens[0]), &m.id, like(), t).unwrap();
        }
        m
    };
    let path = FileStore::open(dir.path(), Durability::Flush).unwrap().events_path(&m.id);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1] = "{garbage}";
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let store = FileStore::open(dir.path(), Durability::Sync).unwrap();
    let err = Service::open(Arc::new(store), ServiceConfig::default(), Arc::new(NullNotifier)).err().unwrap();
    assert!(err.to_string().contains("corrupt line 2"), "{err}");
}
