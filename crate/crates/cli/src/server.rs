//! HTTP service over the shared scoring engine.
//!
//! `POST /v1/score` takes one rollout group in the rollouts.jsonl schema and
//! returns its reward records in input order. `POST /v1/trajectory` returns
//! the entropy trajectory of a single trace. `GET /healthz` reports liveness
//! and whether the judge answers.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use infodensity_core::ingest::{IngestError, RewardRecord, RolloutRecord};
use infodensity_core::{EngineError, ScoringEngine};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub group_id: String,
    pub rewards: Vec<RewardRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryRequest {
    #[serde(default)]
    pub trace_id: Option<String>,
    pub question: String,
    pub steps: Vec<String>,
    pub answer: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryResponse {
    pub trace_id: String,
    pub values: Vec<f64>,
    pub information_gains: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub judge_reachable: bool,
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(error: String, field: Option<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody { error, field },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Invalid(_) => StatusCode::BAD_REQUEST,
            EngineError::Judge { .. } => StatusCode::BAD_GATEWAY,
            EngineError::Reward(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let field = match &e {
            EngineError::Invalid(IngestError::Schema { field, .. }) => Some(field.clone()),
            _ => None,
        };
        Self {
            status,
            body: ErrorBody {
                error: e.to_string(),
                field,
            },
        }
    }
}

/// Deserialises a body, reporting the path of the offending field.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let missing = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next());
        let field = match (missing, path.as_str()) {
            (Some(name), "." | "") => Some(name.to_owned()),
            (Some(name), prefix) => Some(format!("{prefix}.{name}")),
            (None, "." | "") => None,
            (None, p) => Some(p.to_owned()),
        };
        ApiError::bad_request(format!("invalid request body: {message}"), field)
    })
}

type AppState = Arc<ScoringEngine>;

async fn score(State(engine): State<AppState>, body: Bytes) -> Result<Json<ScoreResponse>, ApiError> {
    let record: RolloutRecord = parse_body(&body)?;
    let rewards = engine.score_record(&record).await?;
    Ok(Json(ScoreResponse {
        group_id: record.group_id,
        rewards,
    }))
}

async fn trajectory(
    State(engine): State<AppState>,
    body: Bytes,
) -> Result<Json<TrajectoryResponse>, ApiError> {
    let req: TrajectoryRequest = parse_body(&body)?;
    for (field, value) in [("question", &req.question), ("answer", &req.answer)] {
        if value.trim().is_empty() {
            return Err(ApiError::bad_request(format!("{field} must not be empty"), Some(field.into())));
        }
    }
    let trace_id = req.trace_id.unwrap_or_else(|| "trace".into());
    let traj = engine
        .trajectory(&trace_id, &req.question, &req.steps, &req.answer)
        .await?;
    Ok(Json(TrajectoryResponse {
        information_gains: traj.information_gains().collect(),
        values: traj.values().to_vec(),
        trace_id,
    }))
}

async fn healthz(State(engine): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        judge_reachable: engine.judge().reachable().await,
    })
}

pub fn router(engine: Arc<ScoringEngine>) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/trajectory", post(trajectory))
        .route("/healthz", get(healthz))
        .with_state(engine)
}

/// Resolves on ctrl-c or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutdown requested, draining in-flight requests");
}

/// Serves until `shutdown` resolves; in-flight requests are completed.
pub async fn serve(
    engine: Arc<ScoringEngine>,
    addr: SocketAddr,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Config(format!("binding {addr}: {e}")))?;
    tracing::info!(addr = %addr, "listening");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| CliError::Output(format!("server error: {e}")))
}
