//! In-process HTTP driver shared by the service tests.
#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use wayfinder_core::engine::Step;
use wayfinder_core::store::Store;
use wayfinder_core::{bundled, LevelSpec};
use wayfinder_service::{router, AppState, FixedClock, Registry};

pub const T0: &str = "1970-01-01T00:00:00Z";

pub fn app(root: &Path) -> (Router, Arc<Registry>) {
    app_with(root, bundled::levels())
}

pub fn app_with(root: &Path, levels: Vec<LevelSpec>) -> (Router, Arc<Registry>) {
    let registry = Arc::new(Registry::new(levels, Store::open(root).unwrap(), Box::new(FixedClock(T0.into()))));
    (router(AppState { registry: registry.clone() }, None), registry)
}

pub struct Reply {
    pub status: StatusCode,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or(Value::Null)
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_owned()
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b)
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

pub async fn create(app: &Router, level_id: &str, participant: &str, session_id: &str) -> Reply {
    let body = serde_json::json!({"level_id": level_id, "participant_id": participant, "session_id": session_id});
    call(app, Method::POST, "/api/sessions", Some(body.to_string())).await
}

/// Sends one scripted step over HTTP.
pub async fn send_step(app: &Router, session_id: &str, step: &Step) -> Reply {
    match step {
        Step::AckBriefing => call(app, Method::POST, &format!("/api/sessions/{session_id}/ack-briefing"), None).await,
        Step::Samples { samples } => {
            let body = serde_json::json!({ "samples": samples });
            call(app, Method::POST, &format!("/api/sessions/{session_id}/samples"), Some(body.to_string())).await
        }
        Step::Act(action) => {
            let body = serde_json::to_string(action).unwrap();
            call(app, Method::POST, &format!("/api/sessions/{session_id}/actions"), Some(body)).await
        }
    }
}

/// Plays a whole script over HTTP, returning every reply.
pub async fn play(app: &Router, level_id: &str, participant: &str, session_id: &str, script: &[Step]) -> Vec<Reply> {
    let created = create(app, level_id, participant, session_id).await;
    assert_eq!(created.status, StatusCode::CREATED, "{}", created.text);
    let mut replies = vec![created];
    for step in script {
        replies.push(send_step(app, session_id, step).await);
    }
    replies
}
