mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use intent_cli::server::{router, AppState};
use intent_core::session::SessionStore;
use intent_core::world::World;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path, manifest: Option<std::path::PathBuf>) -> Router {
    router(AppState::new(SessionStore::new(dir, World::desk_scale(), manifest).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn fresh_session_matches_the_initial_world() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let id = create(&app, json!({})).await;
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["v"], 1);
    assert_eq!(v["event_count"], 0);
    assert_eq!(v["state"], serde_json::to_value(World::desk_scale().init()).unwrap());
}

#[tokio::test]
async fn world_endpoint_lists_vocabularies() {
    let dir = tempfile::tempdir().unwrap();
    let (status, v) = call(&app(dir.path(), None), "GET", "/world", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["config"]["action_vocab"].as_array().unwrap().len(), 26);
    assert_eq!(v["fingerprint"], World::desk_scale().fingerprint());
}

#[tokio::test]
async fn errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let (status, v) = call(&app, "GET", "/sessions/nope/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "not_found");

    let id = create(&app, json!({})).await;
    let bad = json!({"action": "teleport", "object": "stove", "room": "kitchen", "intention": "x", "duration": 5});
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["rule"], "unknown-action");

    let neg = json!({"action": "cook", "object": "stove", "room": "kitchen", "intention": "x", "duration": -1});
    let (_, v) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(neg)).await;
    assert_eq!(v["error"]["rule"], "negative-duration");

    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(json!({"action": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["kind"], "request");

    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/predictions"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn resume_replays_to_the_same_state_and_export_validates() {
    let dir = tempfile::tempdir().unwrap();
    let log = common::steady_log(2);
    let reqs = common::requests(&log, 12);
    let before = {
        let app = app(dir.path(), None);
        let id = create(&app, json!({})).await;
        for r in &reqs {
            let (status, v) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(serde_json::to_value(r).unwrap())).await;
            assert_eq!(status, StatusCode::CREATED, "{v}");
        }
        let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
        (id, state)
    };
    let app = app(dir.path(), None);
    let (status, resumed) = call(&app, "POST", &format!("/sessions/{}/resume", before.0), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(resumed, before.1);
    let (_, export) = call(&app, "GET", &format!("/sessions/{}/export", before.0), None).await;
    assert_eq!(export["events"].as_array().unwrap().len(), 12);
    assert_eq!(export["violations"], json!([]));
}

#[tokio::test]
async fn predictions_and_conflict_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::tiny_manifest(&dir.path().join("ckpt"));
    let app = app(&dir.path().join("sessions"), Some(manifest));
    let id = create(&app, json!({"participant": "S01", "duration_gate": false})).await;

    let (status, p) = call(&app, "GET", &format!("/sessions/{id}/predictions"), None).await;
    assert_eq!(status, StatusCode::OK, "{p}");
    assert_eq!(p["padded"], 7);
    assert_eq!(p["next_actions"].as_array().unwrap().len(), 26);
    let long = p["long_term"].as_array().unwrap();
    assert_eq!(long.len(), 5);
    let sims: Vec<f64> = long.iter().map(|e| e["similarity"].as_f64().unwrap()).collect();
    assert!(sims.windows(2).all(|w| w[0] >= w[1]));
    let (_, again) = call(&app, "GET", &format!("/sessions/{id}/predictions"), None).await;
    assert_eq!(p, again);

    let odd = json!({"action": "sit", "object": "none", "room": "living room", "intention": "juggle flaming torches", "duration": 20});
    let (status, posted) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(odd)).await;
    assert_eq!(status, StatusCode::CREATED, "{posted}");
    let (_, c) = call(&app, "GET", &format!("/sessions/{id}/conflicts"), None).await;
    assert_eq!(c["latest"]["r_conf"], 1);
    assert!(c["latest"]["query_text"].as_str().unwrap().contains("juggle flaming torches"));
    assert_eq!(c["pending"].as_array().unwrap().len(), 1);

    let dismiss = json!({"kind": "warning_dismissed", "event_index": 0});
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/annotations"), Some(dismiss)).await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, c) = call(&app, "GET", &format!("/sessions/{id}/conflicts"), None).await;
    assert_eq!(c["pending"], json!([]));
    let text = std::fs::read_to_string(dir.path().join("sessions").join(format!("{id}.jsonl"))).unwrap();
    assert!(text.lines().last().unwrap().contains("\"type\":\"annotation\""));
}
