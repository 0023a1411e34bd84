//! REST front end for the annotation service.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dfactscore::annotation::{AnnotationError, AnnotationService, StepThreeLabel, StepTwoLabel};
use serde::Deserialize;
use serde_json::json;

pub const TOKEN_HEADER: &str = "x-dfs-token";
pub const TOKEN_ENV: &str = "DFS_ANNOTATION_TOKEN";

#[derive(Clone)]
struct AppState {
    service: Arc<AnnotationService>,
    token: Arc<str>,
}

struct ApiError(AnnotationError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            AnnotationError::UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "unknown_annotator"),
            AnnotationError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
            AnnotationError::NotAssigned { .. } => (StatusCode::FORBIDDEN, "not_assigned"),
            AnnotationError::PartitionViolation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "partition_violation"),
            AnnotationError::IncompleteLabels(_) => (StatusCode::UNPROCESSABLE_ENTITY, "incomplete_labels"),
            AnnotationError::MissingStepTwo { .. } => (StatusCode::CONFLICT, "missing_step_two"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(json!({"error": kind, "message": self.0.to_string()}))).into_response()
    }
}

async fn require_token(State(state): State<AppState>, headers: HeaderMap, req: Request, next: Next) -> Response {
    match headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok()) {
        Some(t) if t == &*state.token => next.run(req).await,
        _ => (StatusCode::UNAUTHORIZED, Json(json!({"error": "unauthorized"}))).into_response(),
    }
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next_task(State(s): State<AppState>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    Ok(Json(s.service.next_task(&q.annotator).map_err(ApiError)?).into_response())
}

async fn step2(State(s): State<AppState>, Json(label): Json<StepTwoLabel>) -> Result<Response, ApiError> {
    let svc = s.service.clone();
    let ack = tokio::task::spawn_blocking(move || svc.submit_step2(label)).await.expect("step-2 task ran");
    Ok(Json(ack.map_err(ApiError)?).into_response())
}

async fn step3(State(s): State<AppState>, Json(label): Json<StepThreeLabel>) -> Result<Response, ApiError> {
    let svc = s.service.clone();
    let ack = tokio::task::spawn_blocking(move || svc.submit_step3(label)).await.expect("step-3 task ran");
    Ok(Json(ack.map_err(ApiError)?).into_response())
}

async fn export(State(s): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], s.service.export_jsonl()).into_response()
}

async fn progress(State(s): State<AppState>) -> Response {
    Json(s.service.progress()).into_response()
}

pub fn router(service: Arc<AnnotationService>, token: &str) -> Router {
    let state = AppState { service, token: Arc::from(token) };
    Router::new()
        .route("/tasks/next", get(next_task))
        .route("/labels/step2", post(step2))
        .route("/labels/step3", post(step3))
        .route("/export", get(export))
        .route("/progress", get(progress))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serve until interrupted.
pub fn serve(service: Arc<AnnotationService>, token: &str, addr: SocketAddr) -> anyhow::Result<()> {
    let app = router(service, token);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("annotation service listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
