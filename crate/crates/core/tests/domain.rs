use meetcues_core::anon::derive_attendee_id;
use meetcues_core::mood::emoji_state;
use meetcues_core::*;

fn session() -> MeetingSession {
    MeetingSession::new(
        MeetingId::new("m1").unwrap(),
        Hashtag::new("abc234").unwrap(),
        "Standup",
        "h1",
        true,
        Salt::from_bytes([0; 16]),
    )
    .unwrap()
}

#[test]
fn event_line_shape() {
    let attendee = AttendeeId::from_bytes([0xab; 16]);
    let e = Event::new(3, 1500, attendee, Payload::Reaction { kind: ReactionKind::Like }).unwrap();
    assert_eq!(
        serde_json::to_string(&e).unwrap(),
        r#"{"seq":3,"ts_ms":1500,"attendee":"abababababababababababababababab","type":"reaction","payload":{"kind":"like"}}"#
    );
    let c = Event::new(
        4,
        1600,
        attendee,
        Payload::Comment { comment_id: CommentId::for_seq(4), text: CommentText::new("Why Q3?").unwrap() },
    )
    .unwrap();
    let line = serde_json::to_string(&c).unwrap();
    assert!(line.ends_with(r#""type":"comment","payload":{"comment_id":"c4","text":"Why Q3?"}}"#), "{line}");
    assert_eq!(serde_json::from_str::<Event>(&line).unwrap(), c);
}

#[test]
fn event_deserialization_rejects_violations() {
    let zero_seq = r#"{"seq":0,"ts_ms":1,"attendee":"abababababababababababababababab","type":"reaction","payload":{"kind":"like"}}"#;
    assert!(serde_json::from_str::<Event>(zero_seq).is_err());
    let long = "x".repeat(2001);
    let oversize = format!(
        r#"{{"seq":1,"ts_ms":1,"attendee":"abababababababababababababababab","type":"comment","payload":{{"comment_id":"c1","text":"{long}"}}}}"#
    );
    assert!(serde_json::from_str::<Event>(&oversize).is_err());
    assert!(CommentText::new("").is_err());
    assert!(CommentText::new("é".repeat(2000)).is_ok());
}

#[test]
fn session_state_machine() {
    let s = session();
    assert_eq!(s.state(), MeetingState::Created);
    assert!(s.end(10).is_err());
    let live = s.start(100).unwrap();
    assert_eq!((live.state(), live.started_at()), (MeetingState::Live, Some(100)));
    assert!(live.start(200).is_err());
    let ended = live.end(700).unwrap();
    assert_eq!((ended.ended_at(), ended.duration_ms()), (Some(700), Some(600)));
    assert!(ended.start(800).is_err() && ended.end(800).is_err());
    // clock skew can never produce ended_at < started_at
    assert_eq!(live.end(50).unwrap().ended_at(), Some(100));
}

#[test]
fn session_record_validation() {
    let json = serde_json::to_string(&session().start(5).unwrap()).unwrap();
    assert!(serde_json::from_str::<MeetingSession>(&json).is_ok());
    let bad = json.replace(r#""started_at":5"#, r#""started_at":null"#);
    assert!(serde_json::from_str::<MeetingSession>(&bad).is_err());
    assert!(MeetingSession::new(MeetingId::new("m").unwrap(), Hashtag::new("abc234").unwrap(), "", "h", true, Salt::from_bytes([0; 16])).is_err());
    assert!(MeetingSession::new(MeetingId::new("m").unwrap(), Hashtag::new("abc234").unwrap(), "x".repeat(201), "h", true, Salt::from_bytes([0; 16])).is_err());
}

#[test]
fn view_hides_salt() {
    let json = serde_json::to_string(&session().view()).unwrap();
    assert!(!json.contains("salt"));
    assert!(json.contains(r#""hashtag":"abc234""#));
}

#[test]
fn hashtag_alphabet_excludes_ambiguous_glyphs() {
    for c in ['0', '1', 'l', 'o'] {
        assert!(!HASHTAG_ALPHABET.contains(&(c as u8)));
        assert!(Hashtag::new(format!("abcde{c}")).is_err());
    }
    assert!(Hashtag::new("ABC234").is_err());
    assert!(Hashtag::new("abc23").is_err());
    let all = Hashtag::from_draws([0, 5, 10, 31, 32, 255]);
    assert!(Hashtag::new(all.as_str()).is_ok());
}

#[test]
fn emoji_json_is_validated() {
    let e = emoji_state(AttendeeId::from_bytes([1; 16]), 3, 1, 2);
    let json = serde_json::to_string(&e).unwrap();
    assert_eq!(serde_json::from_str::<EmojiState>(&json).unwrap(), e);
    let tampered = json.replace(r#""like_count":3"#, r#""like_count":4"#);
    assert!(serde_json::from_str::<EmojiState>(&tampered).is_err());
    assert!(json.contains(r#""color":[100,182,178]"#), "{json}");
}

#[test]
fn snippet_config_bounds() {
    let w = EngagementWeights::default();
    assert!(SnippetConfig::new(0, 0.3, w, 0).is_err());
    assert!(SnippetConfig::new(60, 0.0, w, 0).is_err());
    assert!(SnippetConfig::new(60, 1.0, w, 0).is_ok());
    assert!(SnippetConfig::new(60, 1.01, w, 0).is_err());
    assert!(SnippetConfig::new(60, 0.3, EngagementWeights { reaction: 0.0, comment: 0.0, upvote: 0.0 }, 0).is_err());
    assert!(SnippetConfig::new(60, 0.3, EngagementWeights { reaction: -1.0, comment: 1.0, upvote: 0.0 }, 0).is_err());
    let d = SnippetConfig::default();
    assert_eq!((d.bucket_s(), d.threshold(), d.pad_s()), (60, 0.3, 0));
    let json = serde_json::to_string(&d).unwrap();
    assert_eq!(serde_json::from_str::<SnippetConfig>(&json).unwrap(), d);
}

#[test]
fn event_log_validation() {
    let a = AttendeeId::from_bytes([1; 16]);
    let like = |seq, ts| Event::new(seq, ts, a, Payload::Reaction { kind: ReactionKind::Like }).unwrap();
    assert!(validate_event_log(&[like(1, 0), like(2, 5)]).is_ok());
    assert!(validate_event_log(&[like(1, 0), like(3, 5)]).is_err());
    assert!(validate_event_log(&[like(1, 10), like(2, 5)]).is_err());
    let orphan = Event::new(1, 0, a, Payload::Upvote { comment_id: CommentId::for_seq(9) }).unwrap();
    assert!(validate_event_log(&[orphan]).is_err());
}

#[test]
fn attendee_derivation_is_stable_across_salts() {
    let s1 = Salt::from_bytes([1; 16]);
    assert_eq!(derive_attendee_id(&s1, "a@x.com"), derive_attendee_id(&s1, " A@X.COM"));
    assert_ne!(derive_attendee_id(&s1, "a@x.com"), derive_attendee_id(&s1, "b@x.com"));
}
