use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tower::ServiceExt;
use tower_http::services::{ServeDir, ServeFile};

use super::export::export_results_from_bytes;
use super::state::{ApiError, CampaignService, ResponseSubmission};

type Shared = Arc<CampaignService>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).expect("valid status");
        (status, Json(self.body())).into_response()
    }
}

/// Builds the HTTP API. When a UI directory is configured, unmatched paths
/// fall through to it.
pub fn router(service: Shared) -> Router {
    let ui_dir = service.config.ui_dir.clone();
    let api = Router::new()
        .route("/api/campaign", get(get_campaign))
        .route("/api/session", get(create_session))
        .route("/api/trial/{session}/{index}", get(get_trial))
        .route("/api/response", post(post_response))
        .route("/api/results", get(get_results))
        .route("/audio/{file}", get(get_audio))
        .with_state(service);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    service: Shared,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn get_campaign(State(service): State<Shared>) -> Json<serde_json::Value> {
    Json(service.metadata())
}

async fn create_session(
    State(service): State<Shared>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let alias = query.get("alias").map_or("anonymous", String::as_str);
    let record = service.create_session(alias).await?;
    let body = serde_json::json!({
        "session": record.session_id,
        "alias": record.alias,
        "trials": record.trial_order.len(),
        "cursor": record.cursor,
    });
    Ok(Json(body).into_response())
}

async fn get_trial(
    State(service): State<Shared>,
    Path((session, index)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let index: usize = index.parse().map_err(|_| ApiError::UnknownTrial)?;
    Ok(Json(service.trial(&session, index).await?).into_response())
}

async fn post_response(State(service): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let submission: ResponseSubmission =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(service.submit(submission).await?).into_response())
}

async fn get_results(
    State(service): State<Shared>,
    Query(query): Query<HashMap<String, String>>,
    headers: axum::http::HeaderMap,
) -> Result<Response, ApiError> {
    let Some(expected) = service.config.operator_token.as_deref() else {
        return Err(ApiError::ResultsDisabled);
    };
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented != Some(expected) {
        return Err(ApiError::Unauthorized);
    }
    // Holding the writer lock guarantees the snapshot ends on a full line.
    let bytes = {
        let _writer = service.ingest.lock().await;
        std::fs::read(&service.config.log).map_err(|e| ApiError::Internal(e.to_string()))?
    };
    let export = export_results_from_bytes(&bytes, service.policy()).map_err(ApiError::from)?;
    Ok(match query.get("format").map(String::as_str) {
        Some("csv") => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], export.stats_csv()).into_response(),
        Some("raw") => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], export.raw_csv()).into_response(),
        _ => Json(export).into_response(),
    })
}

async fn get_audio(State(service): State<Shared>, Path(file): Path<String>, request: Request) -> Response {
    let Some(path) = file.strip_suffix(".wav").and_then(|t| service.audio_path(t)) else {
        return (StatusCode::NOT_FOUND, Json(serde_json::json!({"reason": "UnknownAudio"}))).into_response();
    };
    match ServeFile::new(path).oneshot(request).await {
        Ok(res) => res.map(Body::new),
        Err(never) => match never {},
    }
}
