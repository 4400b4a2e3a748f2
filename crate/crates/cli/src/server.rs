//! HTTP API over a [`ReviewSession`].
//!
//! All bodies are UTF-8 JSON. Writes go through one mutex, so decisions are
//! appended to the log one at a time.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use pmn_harvest_core::resolver::AnalysisResult;
use pmn_harvest_core::review::{cross_validate, Decision, ReviewError, ReviewSession};
use pmn_harvest_core::snapshot::SnapshotSet;

use crate::CliError;

pub struct AppState {
    session: Mutex<ReviewSession>,
    snapshots: Option<SnapshotSet>,
}

impl AppState {
    pub fn open(
        analysis: AnalysisResult,
        log_path: &Path,
        snapshots: Option<SnapshotSet>,
    ) -> Result<Arc<Self>, CliError> {
        let session = ReviewSession::open(analysis, log_path)?;
        Ok(Arc::new(AppState {
            session: Mutex::new(session),
            snapshots,
        }))
    }

    fn session(&self) -> MutexGuard<'_, ReviewSession> {
        self.session.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

/// Decision body as posted by a client; the server stamps the time when the
/// client leaves it out.
#[derive(Debug, Deserialize)]
struct DecisionBody {
    descriptor_ui: String,
    chosen_scr_ui: Option<String>,
    reviewer: String,
    #[serde(default)]
    timestamp: Option<DateTime<Utc>>,
}

fn error(status: StatusCode, kind: &str, message: impl ToString) -> Response {
    (
        status,
        Json(json!({ "error": kind, "message": message.to_string() })),
    )
        .into_response()
}

async fn queue(State(state): State<Arc<AppState>>) -> Response {
    Json(state.session().items().to_vec()).into_response()
}

async fn item(State(state): State<Arc<AppState>>, UrlPath(ui): UrlPath<String>) -> Response {
    match state.session().item(&ui) {
        Some(item) => Json(item.clone()).into_response(),
        None => error(
            StatusCode::NOT_FOUND,
            "UnknownDescriptor",
            format!("descriptor {ui} is not in the review queue"),
        ),
    }
}

async fn decide(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let body: DecisionBody = match serde_json::from_slice(&body) {
        Ok(body) => body,
        Err(e) => return error(StatusCode::BAD_REQUEST, "MalformedBody", e),
    };
    let decision = Decision {
        descriptor_ui: body.descriptor_ui,
        chosen_scr_ui: body.chosen_scr_ui,
        reviewer: body.reviewer,
        timestamp: body.timestamp.unwrap_or_else(Utc::now),
    };
    let ui = decision.descriptor_ui.clone();
    let mut session = state.session();
    match session.submit(decision) {
        Ok(()) => {
            let item = session.item(&ui).cloned();
            (StatusCode::CREATED, Json(item)).into_response()
        }
        Err(e @ ReviewError::UnknownDescriptor(_)) => {
            error(StatusCode::NOT_FOUND, "UnknownDescriptor", e)
        }
        Err(e @ ReviewError::CandidateNotOffered { .. }) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, "CandidateNotOffered", e)
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "LogUnwritable", e),
    }
}

async fn agreement(State(state): State<Arc<AppState>>) -> Response {
    let Some(snapshots) = &state.snapshots else {
        return error(
            StatusCode::SERVICE_UNAVAILABLE,
            "SnapshotsNotLoaded",
            "start the service with --snapshots to compute host agreement",
        );
    };
    let decided = state.session().decided_analysis();
    match cross_validate(&decided, snapshots) {
        Ok(agreements) => Json(agreements).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "MissingSnapshot", e),
    }
}

async fn no_ui() -> &'static str {
    "review API is up; start with --assets <dir> to serve the review UI\n"
}

pub fn router(state: Arc<AppState>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queue", get(queue))
        .route("/api/items/{descriptor_ui}", get(item))
        .route("/api/decisions", post(decide))
        .route("/api/agreement", get(agreement))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(no_ui)),
    }
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    assets: Option<PathBuf>,
) -> std::io::Result<()> {
    axum::serve(listener, router(state, assets))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
