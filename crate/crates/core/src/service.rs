//! HTTP front end for the engine.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{problem_id, version, config?}` | `{session_id, opening_message?}` |
//! | POST | `/sessions/{id}/messages` | `{text}` | `{tutor_text, turn_index}` |
//! | GET | `/sessions/{id}` | | the session and its transcript |
//! | GET | `/sessions/{id}/trace` | | one [`TurnTrace`] per student turn |
//! | GET | `/problems` | | the corpus |
//!
//! Unknown sessions and problems give 404, a message sent while the
//! session's previous turn is still running gives 409, backend failures
//! give 502. Errors carry a `{"error": ...}` body.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use crate::orchestrator::{Engine, EngineError, Session, SessionOptions, TurnTrace, Version};

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Session>>>>>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        AppState { engine, sessions: Arc::default() }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/problems", get(list_problems))
        .with_state(AppState::new(engine))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownProblem(_) => StatusCode::NOT_FOUND,
            EngineError::Backend(_) => StatusCode::BAD_GATEWAY,
            EngineError::SessionCompleted | EngineError::TurnLimit(_) => StatusCode::CONFLICT,
            EngineError::EmptyMessage => StatusCode::BAD_REQUEST,
            EngineError::Persist(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(e.status(), e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub problem_id: String,
    pub version: Version,
    #[serde(default)]
    pub config: SessionOptions,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SessionCreated {
    pub session_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opening_message: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostMessage {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TutorReply {
    pub tutor_text: String,
    pub turn_index: usize,
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let Json(body) = body?;
    if let Some(id) = &body.config.session_id {
        if state.sessions.read().expect("session map poisoned").contains_key(id) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("session `{id}` already exists")));
        }
    }
    let session = state.engine.create_session(&body.problem_id, body.version, body.config).await?;
    let reply = SessionCreated {
        session_id: session.id.clone(),
        opening_message: session.history.last().map(|t| t.tutor_text.clone()),
    };
    let mut sessions = state.sessions.write().expect("session map poisoned");
    if sessions.contains_key(&session.id) {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("session `{}` already exists", session.id)));
    }
    sessions.insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(reply)))
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<PostMessage>, JsonRejection>,
) -> Result<Json<TutorReply>, ApiError> {
    let Json(body) = body?;
    let session = state.session(&id)?;
    let mut guard = session
        .try_lock()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "a turn is already in flight for this session"))?;
    let outcome = state.engine.student_turn(&mut guard, &body.text).await?;
    Ok(Json(TutorReply { tutor_text: outcome.tutor_text, turn_index: guard.history.len() }))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Session>, ApiError> {
    let session = state.session(&id)?;
    let guard = session.lock().await;
    Ok(Json(guard.clone()))
}

async fn get_trace(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<TurnTrace>>, ApiError> {
    let session = state.session(&id)?;
    let guard = session.lock().await;
    Ok(Json(guard.traces.clone()))
}

async fn list_problems(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::to_value(state.engine.corpus()).expect("corpus serializes"))
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
