//! HTTP API over a directory of projects, one subdirectory per project id.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use cranial_core::contour::SurfaceContour;
use cranial_core::fit::ViewCamera;
use cranial_core::mirror::LandmarkPair;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::error::ServiceError;
use crate::project::{Inputs, Params, Project, Stage, PROJECT_FILE};
use crate::stages::Workspace;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Clone)]
pub struct AppState {
    root: PathBuf,
    locks: Arc<std::sync::Mutex<HashMap<String, Arc<Mutex<()>>>>>,
}

impl AppState {
    pub fn new(root: impl Into<PathBuf>) -> AppState {
        AppState { root: root.into(), locks: Arc::default() }
    }

    fn project_path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(ServiceError::BadRequest(format!("invalid project id {id:?}")));
        }
        Ok(self.root.join(id).join(PROJECT_FILE))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("lock table poisoned").entry(id.to_string()).or_default().clone()
    }

    /// Runs `f` on the opened workspace on a blocking thread, one call per project at a time.
    async fn with_workspace<T: Send + 'static>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Workspace) -> Result<T, ServiceError> + Send + 'static,
    ) -> Result<T, ServiceError> {
        let path = self.project_path(id)?;
        if !path.is_file() {
            return Err(ServiceError::UnknownProject(id.to_string()));
        }
        let lock = self.lock(id);
        let _guard = lock.lock().await;
        tokio::task::spawn_blocking(move || {
            let mut ws = Workspace::open(&path)?;
            f(&mut ws)
        })
        .await
        .expect("stage worker panicked")
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::MissingInput { .. } | ServiceError::UpstreamInvalid { .. } | ServiceError::ProjectExists(_) => StatusCode::CONFLICT,
            ServiceError::Stage { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::BadRequest(_) | ServiceError::Json(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownProject(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({ "code": self.code(), "message": self.to_string(), "stage": self.stage_name() });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn parse_stage(s: &str) -> ApiResult<Stage> {
    Stage::parse(s).ok_or_else(|| ServiceError::BadRequest(format!("unknown stage {s:?}")))
}

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

fn summary(ws: &Workspace) -> Value {
    json!({ "project": ws.project, "stages": ws.status() })
}

async fn list_projects(State(st): State<AppState>) -> ApiResult<Json<Vec<String>>> {
    let mut ids = Vec::new();
    if let Ok(rd) = std::fs::read_dir(&st.root) {
        for e in rd.flatten() {
            if e.path().join(PROJECT_FILE).is_file() {
                ids.push(e.file_name().to_string_lossy().into_owned());
            }
        }
    }
    ids.sort();
    Ok(Json(ids))
}

#[derive(Deserialize)]
struct CreateProject {
    id: String,
    #[serde(default)]
    inputs: Option<Inputs>,
}

async fn create_project(State(st): State<AppState>, raw: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateProject = body(&raw)?;
    let path = st.project_path(&req.id)?;
    let lock = st.lock(&req.id);
    let _guard = lock.lock().await;
    if path.exists() {
        return Err(ServiceError::ProjectExists(req.id));
    }
    let mut project = Project::new(&req.id);
    project.inputs = req.inputs;
    let ws = Workspace::create(&path, project)?;
    Ok((StatusCode::CREATED, Json(summary(&ws))))
}

async fn get_project(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    st.with_workspace(&id, |ws| Ok(Json(summary(ws)))).await
}

async fn get_stages(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    st.with_workspace(&id, |ws| Ok(Json(serde_json::to_value(ws.status())?))).await
}

async fn get_mesh(State(st): State<AppState>, Path((id, stage)): Path<(String, String)>) -> ApiResult<Response> {
    let stage = parse_stage(&stage)?;
    let bytes = st
        .with_workspace(&id, move |ws| {
            if !ws.is_valid(stage) {
                return Err(ServiceError::UpstreamInvalid { stage, needs: stage });
            }
            let path = ws.stage_file(stage, "mesh").ok_or_else(|| ServiceError::BadRequest(format!("stage {stage} has no mesh")))?;
            std::fs::read(&path).map_err(|e| ServiceError::io(&path, e))
        })
        .await?;
    Ok(([(header::CONTENT_TYPE, "model/stl")], bytes).into_response())
}

async fn put_landmarks(State(st): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Json<Value>> {
    let pairs: Vec<LandmarkPair> = body(&raw)?;
    st.with_workspace(&id, move |ws| {
        ws.edit(|p| p.landmarks = pairs)?;
        Ok(Json(summary(ws)))
    })
    .await
}

async fn put_contour(State(st): State<AppState>, Path((id, which)): Path<(String, String)>, raw: Bytes) -> ApiResult<Json<Value>> {
    let contour: SurfaceContour = body(&raw)?;
    let inner = match which.as_str() {
        "defect" => false,
        "inner_edge" => true,
        _ => return Err(ServiceError::BadRequest(format!("unknown contour {which:?}"))),
    };
    st.with_workspace(&id, move |ws| {
        ws.edit(|p| if inner { p.contour_inner_edge = Some(contour) } else { p.contour_defect = Some(contour) })?;
        Ok(Json(summary(ws)))
    })
    .await
}

async fn put_camera(State(st): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Json<Value>> {
    let camera: Option<ViewCamera> = body(&raw)?;
    if let Some(c) = &camera {
        c.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    }
    st.with_workspace(&id, move |ws| {
        ws.edit(|p| p.camera = camera)?;
        Ok(Json(summary(ws)))
    })
    .await
}

async fn put_params(State(st): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Json<Value>> {
    let params: Params = body(&raw)?;
    st.with_workspace(&id, move |ws| {
        ws.edit(|p| p.params = params)?;
        Ok(Json(summary(ws)))
    })
    .await
}

async fn run_stage(State(st): State<AppState>, Path((id, stage)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let stage = parse_stage(&stage)?;
    st.with_workspace(&id, move |ws| {
        let rec = ws.run_stage(stage)?.clone();
        Ok(Json(json!({ "stage": stage, "record": rec, "stages": ws.status() })))
    })
    .await
}

async fn get_report(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    st.with_workspace(&id, |ws| {
        if !ws.is_valid(Stage::Evaluate) {
            return Err(ServiceError::UpstreamInvalid { stage: Stage::Evaluate, needs: Stage::Evaluate });
        }
        Ok(Json(ws.project.stage_outputs[&Stage::Evaluate].data.clone()))
    })
    .await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/stages", get(get_stages))
        .route("/projects/{id}/stages/{stage}/mesh", get(get_mesh))
        .route("/projects/{id}/landmarks", put(put_landmarks))
        .route("/projects/{id}/contours/{which}", put(put_contour))
        .route("/projects/{id}/camera", put(put_camera))
        .route("/projects/{id}/params", put(put_params))
        .route("/projects/{id}/run/{stage}", post(run_stage))
        .route("/projects/{id}/report", get(get_report))
        .with_state(state)
}

/// Port from `CRANIAL_PORT`, else the default.
pub fn port_from_env() -> u16 {
    std::env::var("CRANIAL_PORT").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_PORT)
}

pub async fn serve(root: PathBuf, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    axum::serve(listener, router(AppState::new(root))).await
}
