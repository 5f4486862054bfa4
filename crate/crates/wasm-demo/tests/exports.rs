use meetcues_wasm_demo::{emoji, plan, ramp};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn emoji_reports_mood_color_size_and_face() {
    // 3 likes, 1 clarify: mood 0.5, halfway from gray to teal
    let e = parse(&emoji(3, 1, 3));
    assert_eq!(e["mood"], 0.5);
    assert_eq!(e["color"], serde_json::json!([100, 182, 178]));
    assert_eq!(e["size_scale"], 2.0);
    assert_eq!(e["expression"], "happy");
    let quiet = parse(&emoji(0, 0, 0));
    assert_eq!(quiet["color"], serde_json::json!([200, 200, 200]));
    assert_eq!(quiet["expression"], "neutral");
    assert_eq!(parse(&emoji(0, 5, 0))["expression"], "thinking");
}

#[test]
fn ramp_ends_on_the_stop_colors() {
    let r = parse(&ramp(5));
    // -0.5 is (222, 197, 106.5), the half rounding away from zero
    let hex: Vec<&str> = r.as_array().unwrap().iter().map(|s| s["hex"].as_str().unwrap()).collect();
    assert_eq!(hex, ["#f4c20d", "#dec56b", "#c8c8c8", "#64b6b2", "#00a39b"]);
    assert_eq!(parse(&ramp(0)).as_array().unwrap().len(), 2);
}

#[test]
fn plan_merges_adjacent_busy_minutes() {
    // norms 0.1, 1.0, 0.3, 0.2, 0.5 under divide-by-max
    let p = parse(&plan("[[1,0],[8,2],[3,0],[2,0],[4,1]]", 0.3, 0, "max").unwrap());
    let spans: Vec<(f64, f64)> = p["snippets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["start_s"].as_f64().unwrap(), s["end_s"].as_f64().unwrap()))
        .collect();
    assert_eq!(spans, [(60.0, 180.0), (240.0, 300.0)]);
    assert_eq!(p["timeline"].as_array().unwrap().len(), 5);
    assert_eq!(p["snippets"][0]["peak_norm"], 1.0);
}

#[test]
fn plan_rejects_bad_input() {
    assert!(plan("not json", 0.3, 0, "max").is_err());
    assert!(plan("[[1,0]]", 0.3, 0, "median").is_err());
    assert!(plan("[[1,0]]", 1.5, 0, "max").is_err());
}
