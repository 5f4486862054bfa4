//! Browser bindings over the core engines. Every export takes plain numbers
//! or JSON text and returns JSON text, so the page needs no glue beyond
//! `JSON.parse`.

use meetcues_core::mood::{color_of, emoji_state};
use meetcues_core::snippet::plan_snippets;
use meetcues_core::timeline::from_counts;
use meetcues_core::{AttendeeId, EngagementWeights, Normalization, SnippetConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Emoji for one attendee's counts, serialized as on the wire.
#[wasm_bindgen]
pub fn emoji(likes: u32, clarifies: u32, comments: u32) -> String {
    let state = emoji_state(AttendeeId::from_bytes([0; 16]), likes.into(), clarifies.into(), comments.into());
    serde_json::to_string(&state).expect("emoji state serializes")
}

/// Mood ramp sampled at `steps` evenly spaced moods from -1 to +1, as
/// `[{"mood":m,"hex":"#rrggbb"}]`.
#[wasm_bindgen]
pub fn ramp(steps: u32) -> String {
    let n = steps.max(2);
    let stops: Vec<_> = (0..n)
        .map(|i| {
            // endpoints exact, so the ramp always shows both stop colors
            let mood = if i + 1 == n { 1.0 } else { -1.0 + 2.0 * f64::from(i) / f64::from(n - 1) };
            let c = color_of(mood).expect("mood in range");
            json!({ "mood": mood, "hex": format!("#{:02x}{:02x}{:02x}", c.0, c.1, c.2) })
        })
        .collect();
    serde_json::Value::Array(stops).to_string()
}

/// Timeline and snippet plan from per-minute `[reactions, comments]` pairs.
///
/// `normalization` is `"max"` or `"total"`. Returns
/// `{"timeline":[...],"snippets":[{"start_s","end_s","peak_norm"}]}` or an
/// error message.
#[wasm_bindgen]
pub fn plan(counts_json: &str, threshold: f64, pad_s: u32, normalization: &str) -> Result<String, String> {
    let pairs: Vec<(u64, u64)> = serde_json::from_str(counts_json).map_err(|e| format!("counts: {e}"))?;
    let normalization = match normalization {
        "max" => Normalization::Max,
        "total" => Normalization::Total,
        other => return Err(format!("unknown normalization {other:?}")),
    };
    let config = SnippetConfig::new(60, threshold, EngagementWeights::default(), pad_s)
        .map_err(|e| e.to_string())?
        .with_normalization(normalization);
    let counts: Vec<(u64, u64, u64)> = pairs.iter().map(|&(r, c)| (r, c, 0)).collect();
    let timeline = from_counts(&counts, &config);
    let duration_s = (timeline.len() * 60) as f64;
    let snippets: Vec<_> = plan_snippets(&timeline, &config, duration_s)
        .into_iter()
        .map(|p| json!({ "start_s": p.interval.start_s, "end_s": p.interval.end_s, "peak_norm": p.peak_norm }))
        .collect();
    Ok(json!({ "timeline": timeline, "snippets": snippets }).to_string())
}
