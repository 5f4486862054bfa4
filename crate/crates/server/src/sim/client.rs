//! HTTP client for a running server, including a reader for the push stream.

use futures::stream::BoxStream;
use futures::StreamExt;
use meetcues_core::{CloudState, Event, MeetingId, MeetingView};
use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::api::{SIM_SEED_HEADER, SIM_TIME_HEADER};
use crate::service::{CreatedMeeting, PushMessage, SessionToken, Submission};

use super::SimError;

#[derive(Debug, Clone)]
pub struct LiveClient {
    http: reqwest::Client,
    base: String,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    message: String,
}

impl LiveClient {
    pub fn new(base: &str) -> Self {
        Self { http: reqwest::Client::new(), base: base.trim_end_matches('/').to_owned() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str, token: Option<&str>, now: Option<u64>) -> RequestBuilder {
        let mut rb = self.http.request(method, format!("{}{path}", self.base));
        if let Some(t) = token {
            rb = rb.bearer_auth(t);
        }
        if let Some(now) = now {
            rb = rb.header(SIM_TIME_HEADER, now.to_string());
        }
        rb
    }

    async fn send(rb: RequestBuilder) -> Result<reqwest::Response, SimError> {
        let resp = rb.send().await.map_err(|e| SimError::Transport(e.to_string()))?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status().as_u16();
        let text = resp.text().await.unwrap_or_default();
        let (code, message) = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => (b.error, b.message),
            Err(_) => (String::from("unknown"), text),
        };
        Err(SimError::Rejected { status, code, message })
    }

    async fn json<T: DeserializeOwned>(rb: RequestBuilder) -> Result<T, SimError> {
        Self::send(rb).await?.json().await.map_err(|e| SimError::Transport(e.to_string()))
    }

    pub async fn create(
        &self,
        host_id: &str,
        title: &str,
        recording_enabled: bool,
        now: Option<u64>,
        seed: Option<u64>,
    ) -> Result<CreatedMeeting, SimError> {
        let mut rb = self.request(Method::POST, "/api/meetings", None, now);
        if let Some(seed) = seed {
            rb = rb.header(SIM_SEED_HEADER, seed.to_string());
        }
        Self::json(rb.json(&json!({"host_id": host_id, "title": title, "recording_enabled": recording_enabled}))).await
    }

    pub async fn join(&self, hashtag: &str, email: &str, now: Option<u64>) -> Result<SessionToken, SimError> {
        let rb = self.request(Method::POST, &format!("/api/meetings/{hashtag}/join"), None, now);
        Self::json(rb.json(&json!({"email": email}))).await
    }

    pub async fn start(&self, id: &MeetingId, token: &str, now: Option<u64>) -> Result<MeetingView, SimError> {
        Self::json(self.request(Method::POST, &format!("/api/meetings/{id}/start"), Some(token), now)).await
    }

    pub async fn end(&self, id: &MeetingId, token: &str, now: Option<u64>) -> Result<MeetingView, SimError> {
        Self::json(self.request(Method::POST, &format!("/api/meetings/{id}/end"), Some(token), now)).await
    }

    pub async fn submit(
        &self,
        id: &MeetingId,
        token: &str,
        submission: &Submission,
        now: Option<u64>,
    ) -> Result<Event, SimError> {
        Self::json(self.request(Method::POST, &format!("/api/meetings/{id}/events"), Some(token), now).json(submission))
            .await
    }

    pub async fn upload(
        &self,
        id: &MeetingId,
        token: &str,
        wav: Vec<u8>,
        offset_ms: u64,
        now: Option<u64>,
    ) -> Result<(), SimError> {
        let path = format!("/api/meetings/{id}/recording?offset_ms={offset_ms}");
        Self::send(self.request(Method::PUT, &path, Some(token), now).body(wav)).await.map(drop)
    }

    pub async fn state(&self, id: &MeetingId, token: &str, at_ms: Option<u64>) -> Result<CloudState, SimError> {
        let path = match at_ms {
            Some(t) => format!("/api/meetings/{id}/state?at_ms={t}"),
            None => format!("/api/meetings/{id}/state"),
        };
        Self::json(self.request(Method::GET, &path, Some(token), None)).await
    }

    /// Raw summary bytes, or `None` while generation is pending.
    pub async fn summary(&self, id: &MeetingId, token: &str) -> Result<Option<Vec<u8>>, SimError> {
        let rb = self.request(Method::GET, &format!("/api/meetings/{id}/summary"), Some(token), None);
        match Self::send(rb).await {
            Ok(resp) => Ok(Some(resp.bytes().await.map_err(|e| SimError::Transport(e.to_string()))?.to_vec())),
            Err(SimError::Rejected { status, code, .. }) if status == StatusCode::NOT_FOUND && code == "pending" => {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Polls until the summary is ready.
    pub async fn wait_summary(&self, id: &MeetingId, token: &str) -> Result<Vec<u8>, SimError> {
        loop {
            if let Some(bytes) = self.summary(id, token).await? {
                return Ok(bytes);
            }
            tokio::time::sleep(std::time::Duration::from_millis(20)).await;
        }
    }

    /// Opens the push stream. Each item is one decoded message.
    pub async fn subscribe(
        &self,
        id: &MeetingId,
        token: &str,
    ) -> Result<BoxStream<'static, Result<PushMessage, SimError>>, SimError> {
        let resp = Self::send(self.request(Method::GET, &format!("/api/meetings/{id}/stream"), Some(token), None)).await?;
        let bytes = resp.bytes_stream();
        Ok(futures::stream::unfold((bytes, SseParser::default()), |(mut bytes, mut parser)| async move {
            loop {
                if let Some(data) = parser.next_data() {
                    let msg = serde_json::from_str(&data).map_err(|e| SimError::Transport(e.to_string()));
                    return Some((msg, (bytes, parser)));
                }
                match bytes.next().await? {
                    Ok(chunk) => parser.feed(&chunk),
                    Err(e) => return Some((Err(SimError::Transport(e.to_string())), (bytes, parser))),
                }
            }
        })
        .boxed())
    }
}

/// Minimal server-sent-events framing: collects `data:` lines until a blank
/// line. Comments and other fields are ignored.
#[derive(Debug, Default)]
pub struct SseParser {
    buffer: Vec<u8>,
    data: Vec<String>,
    ready: std::collections::VecDeque<String>,
}

impl SseParser {
    pub fn feed(&mut self, chunk: &[u8]) {
        self.buffer.extend_from_slice(chunk);
        while let Some(pos) = self.buffer.iter().position(|&b| b == b'\n') {
            let raw: Vec<u8> = self.buffer.drain(..=pos).collect();
            let line = String::from_utf8_lossy(&raw);
            let line = line.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                if !self.data.is_empty() {
                    self.ready.push_back(self.data.join("\n"));
                    self.data.clear();
                }
            } else if let Some(rest) = line.strip_prefix("data:") {
                self.data.push(rest.strip_prefix(' ').unwrap_or(rest).to_owned());
            }
        }
    }

    pub fn next_data(&mut self) -> Option<String> {
        self.ready.pop_front()
    }
}
