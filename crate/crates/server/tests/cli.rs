use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_meetcues");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn serve(data: &Path) -> Server {
    let mut child = Command::new(BIN)
        .args(["serve", "--listen", "127.0.0.1:0", "--simulation", "--data-dir"])
        .arg(data)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}"));
    Server { base: format!("http://{addr}"), child }
}

fn generate(dir: &Path) -> String {
    let trace = dir.join("trace.ndjson");
    let o = run(&[
        "generate", "--attendees", "10", "--duration", "300", "--burst", "120:240:30", "--seed", "7",
        "--audio-rate", "800", "--out", trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    trace.to_str().unwrap().to_owned()
}

#[test]
fn generate_then_verify_passes_and_a_bad_expectation_fails() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path());
    let o = run(&["verify", "--trace", &trace]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("verify: pass\n"));

    let summary = dir.path().join("summary.json");
    let o = run(&["simulate", "--trace", &trace, "--summary-out", summary.to_str().unwrap()]);
    assert!(o.status.success());
    let brief: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(brief["rejected"], 0);

    let mut expected: serde_json::Value = serde_json::from_slice(&std::fs::read(&summary).unwrap()).unwrap();
    expected["timeline"][2]["raw"] = serde_json::json!(-1.0);
    std::fs::write(&summary, serde_json::to_vec(&expected).unwrap()).unwrap();
    let o = run(&["verify", "--trace", &trace, "--expected", summary.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("$.timeline[2].raw: expected -1.0, got"), "{}", stdout(&o));
}

#[test]
fn bad_input_exits_with_a_message() {
    let o = run(&["verify", "--trace", "/nonexistent/trace.ndjson"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reading /nonexistent/trace.ndjson"));
    let o = run(&["generate", "--attendees", "3", "--duration", "60", "--burst", "nonsense"]);
    assert!(!o.status.success());
}

#[test]
fn live_server_matches_offline_and_the_data_dir_is_self_sufficient() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path());
    let data = dir.path().join("data");

    let offline = run(&["simulate", "--trace", &trace]);
    let live = {
        let server = serve(&data);
        run(&["simulate", "--trace", &trace, "--target", &server.base])
    };
    assert!(live.status.success(), "{live:?}");
    let offline: serde_json::Value = serde_json::from_slice(&offline.stdout).unwrap();
    let live: serde_json::Value = serde_json::from_slice(&live.stdout).unwrap();
    assert_eq!(offline, live);

    let id = live["meeting_id"].as_str().unwrap();
    let meeting_dir = data.join(id);
    let stored = std::fs::read(meeting_dir.join("summary.json")).unwrap();
    let o = run(&["summarize", "--meeting", id, "--data-dir", data.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(o.stdout, [stored.as_slice(), b"\n"].concat());
    // one notification per joined address
    assert_eq!(std::fs::read_dir(meeting_dir.join("outbox")).unwrap().count(), 10);

    let out = dir.path().join("cut");
    let o = run(&[
        "snippets", "--events", meeting_dir.join("events.ndjson").to_str().unwrap(),
        "--audio", meeting_dir.join("recording.wav").to_str().unwrap(),
        "--duration-ms", "300000", "--meeting", id, "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let listed: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(listed.len(), 1);
    let path = listed[0]["path"].as_str().unwrap();
    assert_eq!(std::fs::read(out.join(path)).unwrap(), std::fs::read(data.join(path)).unwrap());
}
