//! REST surface of the lab.
//!
//! Operator routes expose everything; site routes (`/api/sessions...`)
//! answer with session ids and document ids only.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use super::{CreatedSession, ExperimentDraft, Lab, LabError, SessionSubject};
use crate::systems::SystemDescriptor;

type Shared = Arc<Lab>;

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl From<LabError> for ApiError {
    fn from(e: LabError) -> Self {
        let status = match e {
            LabError::NotFound(_) => StatusCode::NOT_FOUND,
            LabError::Conflict(_) => StatusCode::CONFLICT,
            LabError::BadRequest(_) => StatusCode::BAD_REQUEST,
            LabError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            LabError::Storage(_) | LabError::Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

/// Replace messages that mention a system id with a generic one.
fn site_facing(lab: &Lab, e: LabError) -> ApiError {
    let ApiError(status, message) = ApiError::from(e);
    let leaks = lab
        .systems()
        .iter()
        .any(|s| message.contains(s.system_id.as_str()));
    if leaks || status == StatusCode::INTERNAL_SERVER_ERROR {
        let generic = match status {
            StatusCode::NOT_FOUND => "not found",
            StatusCode::CONFLICT => "conflict",
            StatusCode::BAD_REQUEST => "bad request",
            StatusCode::SERVICE_UNAVAILABLE => "no results available",
            _ => "internal error",
        };
        return ApiError(status, generic.to_owned());
    }
    ApiError(status, message)
}

async fn blocking<T, F>(lab: &Shared, f: F) -> Result<T, LabError>
where
    F: FnOnce(&Lab) -> Result<T, LabError> + Send + 'static,
    T: Send + 'static,
{
    let lab = Arc::clone(lab);
    tokio::task::spawn_blocking(move || f(&lab))
        .await
        .map_err(|e| LabError::Storage(format!("worker failed: {e}")))?
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_systems(State(lab): State<Shared>) -> Json<Vec<SystemDescriptor>> {
    Json(lab.systems())
}

async fn register_system(
    State(lab): State<Shared>,
    Json(descriptor): Json<SystemDescriptor>,
) -> Result<impl IntoResponse, ApiError> {
    let registered = blocking(&lab, move |lab| lab.register_system(descriptor)).await?;
    Ok((StatusCode::CREATED, Json(registered)))
}

async fn create_experiment(
    State(lab): State<Shared>,
    Json(draft): Json<ExperimentDraft>,
) -> Result<impl IntoResponse, ApiError> {
    let id = blocking(&lab, move |lab| lab.create_experiment(draft)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "experiment_id": id }))))
}

async fn list_experiments(State(lab): State<Shared>) -> impl IntoResponse {
    Json(lab.experiments())
}

async fn get_experiment(State(lab): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(lab.experiment(&id)?))
}

async fn start_experiment(State(lab): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(&lab, move |lab| lab.start_experiment(&id)).await?))
}

async fn stop_experiment(State(lab): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(&lab, move |lab| lab.stop_experiment(&id)).await?))
}

#[derive(Debug, Deserialize)]
struct TrafficBody {
    traffic_fraction_experimental: f64,
}

async fn set_traffic(
    State(lab): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<TrafficBody>,
) -> Result<impl IntoResponse, ApiError> {
    let fraction = body.traffic_fraction_experimental;
    Ok(Json(blocking(&lab, move |lab| lab.set_traffic(&id, fraction)).await?))
}

async fn report(State(lab): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(lab.report(&id)?))
}

/// Body of `POST /api/sessions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub experiment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_record: Option<String>,
}

impl SessionRequest {
    pub fn new(experiment_id: &str, subject: &SessionSubject) -> Self {
        let (query_id, seed_record) = match subject {
            SessionSubject::QueryId(id) => (Some(id.clone()), None),
            SessionSubject::SeedRecord(id) => (None, Some(id.clone())),
        };
        SessionRequest {
            experiment_id: experiment_id.to_owned(),
            query_id,
            seed_record,
        }
    }

    pub fn subject(&self) -> Result<SessionSubject, LabError> {
        match (&self.query_id, &self.seed_record) {
            (Some(q), None) => Ok(SessionSubject::QueryId(q.clone())),
            (None, Some(r)) => Ok(SessionSubject::SeedRecord(r.clone())),
            _ => Err(LabError::BadRequest("give exactly one of query_id and seed_record".into())),
        }
    }
}

/// Body of `POST /api/sessions/{id}/feedback`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub clicks: Vec<usize>,
}

async fn create_session(
    State(lab): State<Shared>,
    Json(body): Json<SessionRequest>,
) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let subject = body.subject().map_err(|e| site_facing(&lab, e))?;
    let experiment_id = body.experiment_id;
    match blocking(&lab, move |lab| lab.create_session(&experiment_id, subject)).await {
        Ok(created) => Ok((StatusCode::CREATED, Json(created))),
        Err(e) => Err(site_facing(&lab, e)),
    }
}

async fn record_feedback(
    State(lab): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<FeedbackRequest>,
) -> Result<impl IntoResponse, ApiError> {
    match blocking(&lab, move |lab| lab.record_feedback(&id, &body.clicks)).await {
        Ok(_) => Ok(Json(json!({ "status": "recorded" }))),
        Err(e) => Err(site_facing(&lab, e)),
    }
}

pub fn router(lab: Shared, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/systems", get(list_systems).post(register_system))
        .route("/api/experiments", get(list_experiments).post(create_experiment))
        .route("/api/experiments/{id}", get(get_experiment))
        .route("/api/experiments/{id}/start", post(start_experiment))
        .route("/api/experiments/{id}/stop", post(stop_experiment))
        .route("/api/experiments/{id}/traffic", post(set_traffic))
        .route("/api/experiments/{id}/report", get(report))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/feedback", post(record_feedback))
        .with_state(lab);
    match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api,
    }
}

/// Serve until `shutdown` resolves. `on_bound` sees the actual address
/// (useful with port 0).
pub async fn serve<S, B>(
    lab: Shared,
    addr: SocketAddr,
    ui_dir: Option<PathBuf>,
    shutdown: S,
    on_bound: B,
) -> std::io::Result<()>
where
    S: Future<Output = ()> + Send + 'static,
    B: FnOnce(SocketAddr),
{
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(lab, ui_dir))
        .with_graceful_shutdown(shutdown)
        .await
}
