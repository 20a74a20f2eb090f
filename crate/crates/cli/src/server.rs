//! JSON API for the review dashboard.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use movesmith_core::eval::{stratify, Stratum};
use movesmith_core::executor::{ApplyResult, ExecError};
use movesmith_core::model::ProjectIndex;
use movesmith_core::pipeline::{
    MoveRecommendation, Pipeline, PipelineError, RunRecord, RunStore, Verdict,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

pub struct AppState {
    pub pipeline: Pipeline,
    pub store: RunStore,
    /// Rebuilt after every successful apply.
    pub index: RwLock<ProjectIndex>,
}

impl AppState {
    pub fn new(pipeline: Pipeline, store: RunStore, index: ProjectIndex) -> Arc<Self> {
        Arc::new(Self {
            pipeline,
            store,
            index: RwLock::new(index),
        })
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::UnknownClass(_)
            | PipelineError::UnknownRun(_)
            | PipelineError::UnknownRecommendation { .. } => StatusCode::NOT_FOUND,
            PipelineError::BadRating(_) | PipelineError::Config(_) => StatusCode::BAD_REQUEST,
            PipelineError::Exec(
                ExecError::StaleIndex(_)
                | ExecError::PlanConflict { .. }
                | ExecError::Infeasible(_),
            ) => StatusCode::CONFLICT,
            PipelineError::Llm { .. } | PipelineError::Embedding { .. } => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(internal)?
}

#[derive(Debug, Deserialize)]
pub struct Page {
    #[serde(default)]
    offset: usize,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    100
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassRow {
    pub name: String,
    pub methods: usize,
    pub stratum: Stratum,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassPage {
    pub total: usize,
    pub offset: usize,
    pub classes: Vec<ClassRow>,
}

async fn classes(
    State(state): State<Arc<AppState>>,
    Query(page): Query<Page>,
) -> Result<Json<ClassPage>, ApiError> {
    let index = state.index.read().map_err(internal)?;
    let classes = index
        .classes
        .values()
        .skip(page.offset)
        .take(page.limit)
        .map(|c| ClassRow {
            name: c.qualified_name.clone(),
            methods: c.methods.len(),
            stratum: stratify(c),
        })
        .collect();
    Ok(Json(ClassPage {
        total: index.classes.len(),
        offset: page.offset,
        classes,
    }))
}

#[derive(Debug, Deserialize)]
pub struct RecommendRequest {
    pub class: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub run_id: String,
    pub recommendations: Vec<MoveRecommendation>,
    pub warnings: Vec<String>,
}

async fn recommend(
    State(state): State<Arc<AppState>>,
    Json(req): Json<RecommendRequest>,
) -> Result<Json<RecommendResponse>, ApiError> {
    blocking(move || {
        let index = state.index.read().map_err(internal)?;
        let rec = state.pipeline.recommend(&index, &req.class)?;
        state.store.save(&rec)?;
        Ok(Json(RecommendResponse {
            run_id: rec.run_id,
            recommendations: rec.recommendations,
            warnings: rec.warnings,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct ApplyRequest {
    pub run_id: String,
    /// 0-based.
    pub recommendation_index: usize,
}

async fn apply(
    State(state): State<Arc<AppState>>,
    Json(req): Json<ApplyRequest>,
) -> Result<Json<ApplyResult>, ApiError> {
    blocking(move || {
        // writers queue here; the executor also holds its own global lock
        let mut index = state.index.write().map_err(internal)?;
        let applied = state.store.apply(&req.run_id, req.recommendation_index)?;
        *index = applied.index;
        Ok(Json(applied.result))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct VerdictRequest {
    pub run_id: String,
    pub recommendation_index: usize,
    pub rating: Option<u8>,
    #[serde(default)]
    pub applied: bool,
}

async fn verdict(
    State(state): State<Arc<AppState>>,
    Json(req): Json<VerdictRequest>,
) -> Result<Json<Verdict>, ApiError> {
    blocking(move || {
        Ok(Json(state.store.record_verdict(
            &req.run_id,
            req.recommendation_index,
            req.rating,
            req.applied,
        )?))
    })
    .await
}

async fn run(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<RunRecord>, ApiError> {
    blocking(move || Ok(Json(state.store.load(&id)?))).await
}

/// API routes, plus static files from `ui` for every other path.
pub fn router(state: Arc<AppState>, ui: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/classes", get(classes))
        .route("/recommend", post(recommend))
        .route("/apply", post(apply))
        .route("/verdict", post(verdict))
        .route("/runs/:id", get(run))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
