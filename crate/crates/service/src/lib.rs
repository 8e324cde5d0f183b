//! HTTP session service.
//!
//! Each session lives behind its own async mutex, so requests for one
//! session are applied in arrival order while different sessions proceed
//! in parallel. Sessions are written to the store whenever their phase
//! changes and, for idle sessions with unsaved samples, by a periodic
//! sweep.

mod error;
mod registry;

use std::sync::Arc;
use std::time::Duration;

use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use wayfinder_core::engine::{Action, Briefing, SessionView};
use wayfinder_core::{LevelSpec, TrajectorySample};

pub use error::ApiError;
pub use registry::{Clock, FixedClock, Registry, SystemClock};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
}

/// JSON body extractor whose rejections use the API error shape (422).
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(e) => Err(ApiError::malformed(e.body_text())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct LevelSummary {
    pub level_id: String,
    pub name: String,
    pub difficulty_rank: u8,
    pub checkpoints: usize,
}

impl From<&LevelSpec> for LevelSummary {
    fn from(l: &LevelSpec) -> Self {
        Self {
            level_id: l.level_id.clone(),
            name: l.name.clone(),
            difficulty_rank: l.difficulty_rank,
            checkpoints: l.checkpoints.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub level_id: String,
    pub participant_id: String,
    /// Operator-chosen id; a random one is assigned when absent.
    #[serde(default)]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub briefing: Briefing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBatch {
    pub samples: Vec<TrajectorySample>,
}

/// Builds the router. `cors_origin` of `Some("*")` allows any origin.
pub fn router(state: AppState, cors_origin: Option<&str>) -> Router {
    let api = Router::new()
        .route("/api/levels", get(list_levels))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/briefing", get(get_briefing))
        .route("/api/sessions/{id}/ack-briefing", post(ack_briefing))
        .route("/api/sessions/{id}/samples", post(post_samples))
        .route("/api/sessions/{id}/actions", post(post_action))
        .route("/api/sessions/{id}/metrics", get(get_metrics))
        .route("/api/sessions/{id}/document", get(get_document))
        .fallback(|| async { ApiError::not_found("route_not_found", "no such route") })
        .with_state(state);
    match cors_origin {
        None => api,
        Some("*") => api.layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any)),
        Some(origin) => match origin.parse::<HeaderValue>() {
            Ok(o) => api.layer(CorsLayer::new().allow_origin(o).allow_methods(Any).allow_headers(Any)),
            Err(_) => api,
        },
    }
}

async fn list_levels(State(app): State<AppState>) -> Json<Vec<LevelSummary>> {
    Json(app.registry.levels().iter().map(|l| LevelSummary::from(l.as_ref())).collect())
}

async fn create_session(
    State(app): State<AppState>,
    ApiJson(body): ApiJson<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let (session_id, briefing) = app.registry.create(&body.level_id, &body.participant_id, body.session_id)?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id, briefing })))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    app.registry.read(&id, |s| s.view()).await.map(Json)
}

async fn get_briefing(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Briefing>, ApiError> {
    app.registry.read(&id, |s| s.briefing()).await.map(Json)
}

async fn ack_briefing(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    app.registry.mutate(&id, |s| s.acknowledge_briefing()).await.map(Json)
}

async fn post_samples(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ApiJson(batch): ApiJson<SampleBatch>,
) -> Result<StatusCode, ApiError> {
    app.registry.mutate(&id, |s| s.record_samples(&batch.samples)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn post_action(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ApiJson(action): ApiJson<Action>,
) -> Result<Json<SessionView>, ApiError> {
    app.registry.mutate(&id, |s| s.apply(&action)).await.map(Json)
}

async fn get_metrics(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let report = app.registry.metrics(&id).await?;
    Ok(canonical(report.to_canonical_json()))
}

/// Canonical session document; only once complete, as it names the
/// crafting outcome.
async fn get_document(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let text = app.registry.document(&id).await?;
    Ok(canonical(text))
}

fn canonical(text: String) -> Response {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], text).into_response()
}
