//! JSON-over-HTTP session service.
//!
//! Each session sits behind its own lock: posting and resuming take it
//! exclusively, reads share it, so a read never sees half of a mutation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use intent_core::encoding::Layout;
use intent_core::session::{ActionRequest, Annotation, CreateRequest, Session, SessionStore};
use intent_core::Error;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

/// Environment variable naming the directory session logs are kept in.
pub const DATA_DIR_ENV: &str = "INTENT_DATA_DIR";

type Shared = Arc<RwLock<Session>>;

#[derive(Clone)]
pub struct AppState {
    store: SessionStore,
    live: Arc<Mutex<HashMap<String, Shared>>>,
}

impl AppState {
    pub fn new(store: SessionStore) -> AppState {
        AppState {
            store,
            live: Arc::default(),
        }
    }

    /// The live session, replaying it from disk on first use.
    fn session(&self, id: &str) -> Result<Shared, ApiError> {
        if let Some(s) = self.live.lock().expect("session table").get(id) {
            return Ok(Arc::clone(s));
        }
        let session = Arc::new(RwLock::new(self.store.open(id)?));
        let mut live = self.live.lock().expect("session table");
        Ok(Arc::clone(live.entry(id.to_string()).or_insert(session)))
    }
}

/// An error rendered as `{"v":1,"error":{...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn request(detail: String) -> ApiError {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "kind": "request", "detail": detail }),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, body) = match &e {
            Error::Validation { rule, detail } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "kind": "validation", "rule": rule, "detail": detail }),
            ),
            Error::Ordering { .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "kind": "validation", "rule": intent_core::world::rules::TIME_REGRESSION, "detail": e.to_string() }),
            ),
            Error::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "kind": "not_found", "detail": e.to_string() })),
            Error::Config(_) | Error::Json(_) => (StatusCode::BAD_REQUEST, json!({ "kind": "request", "detail": e.to_string() })),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "kind": "internal", "detail": e.to_string() })),
        };
        ApiError { status, body }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "v": 1, "error": self.body }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok<T: serde::Serialize>(status: StatusCode, value: &T) -> ApiResult {
    let value = serde_json::to_value(value).map_err(|e| ApiError::from(Error::from(e)))?;
    Ok((status, Json(value)).into_response())
}

/// Parses a body, treating an empty one as `{}` when `empty_ok`.
fn parse<T: DeserializeOwned>(body: &Bytes, empty_ok: bool) -> Result<T, ApiError> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) && empty_ok { b"{}" } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError::request(format!("malformed body: {e}")))
}

async fn world(State(app): State<AppState>) -> ApiResult {
    let w = app.store.world();
    ok(
        StatusCode::OK,
        &json!({
            "v": 1,
            "fingerprint": w.fingerprint(),
            "config": w.config(),
            "layout": Layout::for_world(w),
        }),
    )
}

async fn create(State(app): State<AppState>, body: Bytes) -> ApiResult {
    let req: CreateRequest = parse(&body, true)?;
    let session = app.store.create(&req)?;
    let view = session.view();
    app.live
        .lock()
        .expect("session table")
        .insert(session.id().to_string(), Arc::new(RwLock::new(session)));
    ok(StatusCode::CREATED, &view)
}

async fn state(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = app.session(&id)?;
    let view = s.read().expect("session lock").view();
    ok(StatusCode::OK, &view)
}

async fn post_action(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let s = app.session(&id)?;
    let req: ActionRequest = parse(&body, false)?;
    let posted = s.write().expect("session lock").post_action(&req)?;
    ok(StatusCode::CREATED, &posted)
}

async fn predictions(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = app.session(&id)?;
    let p = s.read().expect("session lock").predictions()?;
    ok(StatusCode::OK, &p)
}

async fn conflicts(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = app.session(&id)?;
    let c = s.read().expect("session lock").conflicts();
    ok(StatusCode::OK, &c)
}

async fn resume(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = app.session(&id)?;
    let mut guard = s.write().expect("session lock");
    *guard = app.store.open(&id)?;
    ok(StatusCode::OK, &guard.view())
}

async fn export(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = app.session(&id)?;
    let log = s.read().expect("session lock").export();
    let violations = app.store.world().validate_log(&log);
    ok(
        StatusCode::OK,
        &json!({
            "v": 1,
            "participant_id": log.participant_id,
            "fingerprint": log.fingerprint,
            "events": log.events,
            "violations": violations,
        }),
    )
}

async fn annotate(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let s = app.session(&id)?;
    let a: Annotation = parse(&body, false)?;
    s.write().expect("session lock").annotate(a.clone())?;
    ok(StatusCode::CREATED, &json!({ "v": 1, "annotation": a }))
}

async fn fallback() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        body: json!({ "kind": "not_found", "detail": "no such endpoint" }),
    }
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/world", get(world))
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/predictions", get(predictions))
        .route("/sessions/{id}/conflicts", get(conflicts))
        .route("/sessions/{id}/resume", post(resume))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/annotations", post(annotate))
        .fallback(fallback)
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(app: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
