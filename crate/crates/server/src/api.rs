//! HTTP surface over [`Service`] plus the server-sent-events push stream.
//!
//! Bearer tokens are read from `Authorization: Bearer <t>` or, for clients
//! that cannot set headers (EventSource), from `?token=<t>`.
//!
//! In simulation mode two trusted headers are honoured: `X-Sim-Time-Ms`
//! replaces the wall clock and `X-Sim-Seed` makes meeting creation
//! reproducible. Without simulation mode both are ignored.

use std::convert::Infallible;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use meetcues_core::{CommentOrder, MeetingId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use crate::error::ServiceError;
use crate::service::{render_html, PushCursor, Service};

pub const SIM_TIME_HEADER: &str = "x-sim-time-ms";
pub const SIM_SEED_HEADER: &str = "x-sim-seed";

#[derive(Debug, Clone)]
pub struct ApiConfig {
    /// Honour the simulation headers.
    pub simulation: bool,
    /// A subscriber that cannot take a message within this budget is dropped.
    pub push_budget: Duration,
    pub max_recording_bytes: usize,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self { simulation: false, push_budget: Duration::from_millis(1000), max_recording_bytes: 1 << 30 }
    }
}

#[derive(Clone)]
struct AppState {
    service: Service,
    config: ApiConfig,
}

/// Error response: `{"error": code, "message": text}`, plus `"status":"pending"`
/// for summaries that are not ready.
#[derive(Debug)]
pub enum ApiError {
    Service(ServiceError),
    BadRequest(String),
    TooLarge,
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<&'a str>,
}

fn status_of(e: &ServiceError) -> StatusCode {
    StatusCode::from_u16(e.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::Service(e) => {
                if status_of(e).is_server_error() {
                    tracing::error!(error = %e, "request failed");
                }
                let pending = matches!(e, ServiceError::Pending).then_some("pending");
                (status_of(e), ErrorBody { error: e.code(), message: e.to_string(), status: pending })
            }
            ApiError::BadRequest(m) => {
                (StatusCode::BAD_REQUEST, ErrorBody { error: "validation", message: m.clone(), status: None })
            }
            ApiError::TooLarge => (
                StatusCode::PAYLOAD_TOO_LARGE,
                ErrorBody { error: "validation", message: "recording too large".into(), status: None },
            ),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

fn meeting_id(raw: &str) -> ApiResult<MeetingId> {
    MeetingId::new(raw).map_err(|_| ApiError::Service(ServiceError::NotFound("meeting")))
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], bytes).into_response()
}

#[derive(Deserialize, Default)]
struct TokenQuery {
    token: Option<String>,
}

impl AppState {
    fn now(&self, headers: &HeaderMap) -> u64 {
        if self.config.simulation {
            // An absent header means "as of the latest activity": stamps clamp up to it.
            return header_u64(headers, SIM_TIME_HEADER).unwrap_or(0);
        }
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }

    fn seed(&self, headers: &HeaderMap) -> Option<u64> {
        self.config.simulation.then(|| header_u64(headers, SIM_SEED_HEADER)).flatten()
    }
}

fn header_u64(headers: &HeaderMap, name: &str) -> Option<u64> {
    headers.get(name)?.to_str().ok()?.trim().parse().ok()
}

fn bearer<'a>(headers: &'a HeaderMap, query: &'a TokenQuery) -> Option<&'a str> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer ").or_else(|| v.strip_prefix("bearer ")))
        .map(str::trim)
        .or(query.token.as_deref())
}

/// Builds the router. CORS is open to any origin; tokens travel in headers,
/// not cookies.
pub fn router(service: Service, config: ApiConfig) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::OPTIONS])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]);
    Router::new()
        .route("/api/meetings", post(create_meeting))
        .route("/api/meetings/{id}", get(get_meeting))
        .route("/api/meetings/{id}/join", post(join_meeting))
        .route("/api/meetings/{id}/start", post(start_meeting))
        .route("/api/meetings/{id}/end", post(end_meeting))
        .route("/api/meetings/{id}/events", post(submit_event))
        .route("/api/meetings/{id}/state", get(get_state))
        .route("/api/meetings/{id}/comments", get(get_comments))
        .route("/api/meetings/{id}/timeline", get(get_timeline))
        .route("/api/meetings/{id}/summary", get(get_summary).post(regenerate_summary))
        .route("/api/meetings/{id}/snippets/{index}", get(get_snippet))
        .route("/api/meetings/{id}/recording", put(put_recording))
        .route("/api/meetings/{id}/stream", get(stream))
        .route("/summary/{id}", get(summary_page))
        .route("/summary/{id}/snippets/{index}", get(public_snippet))
        .route("/healthz", get(|| async { "ok" }))
        .layer(cors)
        .with_state(AppState { service, config })
}

#[derive(Deserialize)]
struct CreateBody {
    host_id: String,
    title: String,
    #[serde(default)]
    recording_enabled: bool,
}

async fn create_meeting(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let b: CreateBody = parse_body(&body)?;
    let created =
        app.service.create_meeting(&b.host_id, &b.title, b.recording_enabled, app.now(&headers), app.seed(&headers))?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_meeting(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    app.service.authorize(bearer(&headers, &q), &id)?;
    Ok(Json(app.service.session(&id)?.view()).into_response())
}

#[derive(Deserialize)]
struct JoinBody {
    email: String,
}

/// The path segment is the hashtag here.
async fn join_meeting(
    State(app): State<AppState>,
    Path(hashtag): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let b: JoinBody = parse_body(&body)?;
    Ok(Json(app.service.join_meeting(&hashtag, &b.email, app.now(&headers))?).into_response())
}

async fn start_meeting(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    Ok(Json(app.service.start_meeting(bearer(&headers, &q), &id, app.now(&headers))?).into_response())
}

async fn end_meeting(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    let token = bearer(&headers, &q).map(str::to_owned);
    let now = app.now(&headers);
    let service = app.service.clone();
    let view = tokio::task::spawn_blocking(move || service.end_meeting(token.as_deref(), &id, now))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(view).into_response())
}

async fn submit_event(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    let token = bearer(&headers, &q);
    app.service.authorize(token, &id)?;
    let submission = parse_body(&body)?;
    let submitted = app.service.submit(token, &id, submission, app.now(&headers))?;
    Ok(Json(submitted.event).into_response())
}

#[derive(Deserialize)]
struct StateQuery {
    at_ms: Option<u64>,
    token: Option<String>,
}

async fn get_state(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StateQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    let tq = TokenQuery { token: q.token };
    app.service.authorize(bearer(&headers, &tq), &id)?;
    Ok(Json(app.service.state(&id, q.at_ms)?).into_response())
}

#[derive(Deserialize)]
struct CommentsQuery {
    order: Option<String>,
    token: Option<String>,
}

async fn get_comments(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CommentsQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    let tq = TokenQuery { token: q.token };
    app.service.authorize(bearer(&headers, &tq), &id)?;
    let order = match q.order.as_deref() {
        None | Some("chrono") => CommentOrder::Chrono,
        Some("popularity") => CommentOrder::Popularity,
        Some(other) => return Err(ApiError::BadRequest(format!("unknown order {other:?}"))),
    };
    Ok(Json(app.service.list_comments(&id, order)?).into_response())
}

async fn get_timeline(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    app.service.authorize(bearer(&headers, &q), &id)?;
    Ok(Json(app.service.timeline(&id, app.now(&headers))?).into_response())
}

async fn get_summary(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    app.service.authorize(bearer(&headers, &q), &id)?;
    Ok(json_bytes(app.service.summary_json(&id)?.to_vec()))
}

async fn regenerate_summary(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    let token = bearer(&headers, &q).map(str::to_owned);
    let service = app.service.clone();
    let json = tokio::task::spawn_blocking(move || {
        service.generate_summary(token.as_deref(), &id)?;
        service.summary_json(&id)
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(json_bytes(json.to_vec()))
}

fn wav_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static("audio/wav"))], bytes).into_response()
}

async fn get_snippet(
    State(app): State<AppState>,
    Path((id, index)): Path<(String, usize)>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    app.service.authorize(bearer(&headers, &q), &id)?;
    Ok(wav_response(app.service.snippet_bytes(&id, index)?))
}

#[derive(Deserialize)]
struct RecordingQuery {
    #[serde(default)]
    offset_ms: u64,
    token: Option<String>,
}

/// Streams the upload; the recording indicator is up from the first byte.
async fn put_recording(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RecordingQuery>,
    headers: HeaderMap,
    body: Body,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    let tq = TokenQuery { token: q.token };
    let token = bearer(&headers, &tq).map(str::to_owned);
    app.service.begin_recording(token.as_deref(), &id)?;
    let mut data = Vec::new();
    let mut stream = body.into_data_stream();
    let mut failure = None;
    while let Some(chunk) = stream.next().await {
        match chunk {
            Ok(c) if data.len() + c.len() <= app.config.max_recording_bytes => data.extend_from_slice(&c),
            Ok(_) => {
                failure = Some(ApiError::TooLarge);
                break;
            }
            Err(e) => {
                failure = Some(ApiError::BadRequest(format!("upload interrupted: {e}")));
                break;
            }
        }
    }
    if failure.is_some() {
        data.clear();
    }
    let service = app.service.clone();
    let offset = q.offset_ms;
    let stored = tokio::task::spawn_blocking(move || service.finish_recording(token.as_deref(), &id, &data, offset))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    if let Some(f) = failure {
        return Err(f);
    }
    stored?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn stream(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let id = meeting_id(&id)?;
    app.service.authorize(bearer(&headers, &q), &id)?;
    let mut watch = app.service.subscribe(&id)?;
    let (tx, rx) = tokio::sync::mpsc::channel::<SseEvent>(16);
    let budget = app.config.push_budget;
    tokio::spawn(async move {
        let mut cursor = PushCursor::new();
        loop {
            let state = watch.borrow_and_update().clone();
            for msg in cursor.advance(&state) {
                let event = match SseEvent::default().json_data(&msg) {
                    Ok(e) => e,
                    Err(e) => {
                        tracing::error!(error = %e, "cannot encode push message");
                        return;
                    }
                };
                if tx.send_timeout(event, budget).await.is_err() {
                    tracing::debug!(meeting = %id, "dropping slow or closed subscriber");
                    return;
                }
            }
            if cursor.is_done() || watch.changed().await.is_err() {
                return;
            }
        }
    });
    let events = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (Ok(e), rx)) });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

async fn summary_page(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    let report = app.service.summary_report(&id)?;
    Ok(Html(render_html(&report)).into_response())
}

async fn public_snippet(
    State(app): State<AppState>,
    Path((id, index)): Path<(String, usize)>,
) -> ApiResult<Response> {
    let id = meeting_id(&id)?;
    Ok(wav_response(app.service.snippet_bytes(&id, index)?))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Service,
    config: ApiConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service, config)).with_graceful_shutdown(shutdown).await
}
