//! Read-only HTTP API over stored frames.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use thermnet_core::field::{DisplayConfig, Layer};
use thermnet_core::geometry::Point3;
use thermnet_core::scenegen::{
    generate_scene, legend, serialize_x3d, view_dependent_scene, PrimitiveKind, SceneOptions,
    WallMode,
};
use thermnet_core::sim::load_config;
use thermnet_core::supervisor::{FrameStore, Supervisor, SupervisorError, ThermalFrame};

pub const X3D_CONTENT_TYPE: &str = "model/x3d+xml";

/// Maps wall-clock time onto stored virtual time for the live endpoint.
#[derive(Debug, Clone, Copy)]
pub struct LiveClock {
    pub start: Instant,
    /// Virtual seconds per wall second.
    pub speed: f64,
}

impl LiveClock {
    pub fn new(speed: f64) -> Self {
        Self {
            start: Instant::now(),
            speed,
        }
    }

    /// Virtual time reached by a replay that began at `origin`.
    pub fn virtual_now(&self, origin: f64) -> f64 {
        origin + self.start.elapsed().as_secs_f64() * self.speed
    }
}

pub struct AppState {
    supervisor: RwLock<Supervisor>,
    displays: HashMap<String, DisplayConfig>,
    clock: LiveClock,
}

impl AppState {
    pub fn new(
        supervisor: Supervisor,
        displays: HashMap<String, DisplayConfig>,
        clock: LiveClock,
    ) -> Self {
        Self {
            supervisor: RwLock::new(supervisor),
            displays,
            clock,
        }
    }
}

fn run_dirs(store: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    if store.join("building.json").is_file() {
        dirs.push(store.to_path_buf());
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(store)
        .with_context(|| format!("reading {}", store.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("building.json").is_file())
        .collect();
    subdirs.sort();
    dirs.extend(subdirs);
    Ok(dirs)
}

/// Loads every simulation output found in `store` or its immediate subdirectories.
pub fn load_store(store: &Path) -> anyhow::Result<(Supervisor, HashMap<String, DisplayConfig>)> {
    let mut supervisor = Supervisor::new();
    let mut displays = HashMap::new();
    for dir in run_dirs(store)? {
        let path = dir.join("building.json");
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = load_config(&text).with_context(|| format!("loading {}", path.display()))?;
        let id = cfg.model.id.clone();
        if displays.contains_key(&id) {
            bail!("building `{id}` appears twice under {}", store.display());
        }
        let frames = FrameStore::open(&dir, &id)?;
        log::info!(
            "loaded `{id}` with {} frames from {}",
            frames.len(),
            dir.display()
        );
        supervisor.register_building(Arc::clone(&cfg.model), Vec::new(), 0.0, frames)?;
        displays.insert(id, cfg.display);
    }
    if displays.is_empty() {
        bail!("no building.json found in {}", store.display());
    }
    Ok((supervisor, displays))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/buildings", get(list_buildings))
        .route("/buildings/{id}/frames", get(frames))
        .route("/buildings/{id}/scene", get(scene))
        .route("/buildings/{id}/live/scene", get(live_scene))
        .route("/buildings/{id}/playback", get(playback))
        .with_state(state)
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<SupervisorError> for ApiError {
    fn from(e: SupervisorError) -> Self {
        let status = match e {
            SupervisorError::UnknownBuilding(_)
            | SupervisorError::NoFrames(_)
            | SupervisorError::EmptyRange { .. } => StatusCode::NOT_FOUND,
            SupervisorError::InvalidRange { .. } | SupervisorError::InvalidSpeed(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn list_buildings(State(state): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(
        state
            .supervisor
            .read()
            .expect("supervisor lock")
            .building_ids(),
    )
}

#[derive(Debug, Deserialize)]
pub struct RangeQuery {
    from: Option<f64>,
    to: Option<f64>,
}

async fn frames(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RangeQuery>,
) -> ApiResult<Json<Vec<ThermalFrame>>> {
    let sup = state.supervisor.read().expect("supervisor lock");
    let frames = sup.query_range(
        &id,
        q.from.unwrap_or(f64::NEG_INFINITY),
        q.to.unwrap_or(f64::INFINITY),
    )?;
    Ok(Json(frames.iter().map(|f| (**f).clone()).collect()))
}

#[derive(Debug, Default, Deserialize)]
pub struct SceneQuery {
    t: Option<f64>,
    layer: Option<String>,
    walls: Option<String>,
    primitive: Option<String>,
    vx: Option<f64>,
    vy: Option<f64>,
    vz: Option<f64>,
}

impl SceneQuery {
    fn options(&self, display: &DisplayConfig) -> ApiResult<SceneOptions> {
        let mut opts = SceneOptions::default();
        if let Some(l) = &self.layer {
            opts.layer = l.parse::<Layer>().map_err(ApiError::bad_request)?;
        }
        if let Some(w) = &self.walls {
            opts.walls = w.parse::<WallMode>().map_err(ApiError::bad_request)?;
        }
        if let Some(p) = &self.primitive {
            opts.primitive = p.parse::<PrimitiveKind>().map_err(ApiError::bad_request)?;
        }
        opts.color_map = Some(display.map_for(opts.layer));
        opts.viewpoint = match (self.vx, self.vy, self.vz) {
            (Some(x), Some(y), Some(z)) => Some(Point3::new(x, y, z)),
            (None, None, None) => None,
            _ => return Err(ApiError::bad_request("viewpoint needs all of vx, vy, vz")),
        };
        Ok(opts)
    }
}

fn render(state: &AppState, id: &str, frame: &ThermalFrame, q: &SceneQuery) -> ApiResult<Response> {
    let display = state.displays.get(id).copied().unwrap_or_default();
    let opts = q.options(&display)?;
    let sup = state.supervisor.read().expect("supervisor lock");
    let model = sup.model(id)?;
    let doc = match opts.viewpoint {
        Some(_) => view_dependent_scene(frame, model, &opts),
        None => generate_scene(frame, model, &opts),
    }
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })?;
    let legend = serde_json::to_string(&legend(&opts)).expect("legend serializes");
    let mut resp = serialize_x3d(&doc).into_response();
    let headers = resp.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static(X3D_CONTENT_TYPE),
    );
    headers.insert(
        "x-frame-time",
        HeaderValue::from_str(&frame.t.to_string()).expect("number is a valid header"),
    );
    if let Ok(v) = HeaderValue::from_str(&legend) {
        headers.insert("x-legend", v);
    }
    Ok(resp)
}

async fn scene(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SceneQuery>,
) -> ApiResult<Response> {
    let t = q.t.ok_or_else(|| ApiError::bad_request("missing t"))?;
    let frame = {
        let sup = state.supervisor.read().expect("supervisor lock");
        sup.store(&id)?
            .at_or_before(t)
            .cloned()
            .ok_or_else(|| ApiError {
                status: StatusCode::NOT_FOUND,
                message: format!("no frame at or before t = {t}"),
            })?
    };
    render(&state, &id, &frame, &q)
}

async fn live_scene(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SceneQuery>,
) -> ApiResult<Response> {
    let frame = {
        let sup = state.supervisor.read().expect("supervisor lock");
        let store = sup.store(&id)?;
        let first = store
            .frames()
            .first()
            .ok_or_else(|| SupervisorError::NoFrames(id.clone()))?;
        let now = state.clock.virtual_now(first.t);
        store
            .at_or_before(now)
            .cloned()
            .expect("first frame is at or before now")
    };
    render(&state, &id, &frame, &q)
}

#[derive(Debug, Deserialize)]
pub struct PlaybackQuery {
    from: Option<f64>,
    to: Option<f64>,
    speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackFrame {
    pub t: f64,
    pub presentation_time: f64,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackResponse {
    pub building_id: String,
    pub from: f64,
    pub to: f64,
    pub speed: f64,
    pub frames: Vec<PlaybackFrame>,
}

async fn playback(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PlaybackQuery>,
) -> ApiResult<Json<PlaybackResponse>> {
    let sup = state.supervisor.read().expect("supervisor lock");
    let store = sup.store(&id)?;
    let (first, last) = match (store.frames().first(), store.latest()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(SupervisorError::NoFrames(id).into()),
    };
    let from = q.from.unwrap_or(first);
    let to = q.to.unwrap_or(last);
    let plan = sup.playback(&id, from, to, q.speed.unwrap_or(1.0))?;
    let frames = plan
        .frames
        .iter()
        .zip(&plan.presentation_times)
        .map(|(&t, &p)| PlaybackFrame {
            t,
            presentation_time: p,
            url: format!("/buildings/{}/scene?t={}", plan.building_id, t),
        })
        .collect();
    Ok(Json(PlaybackResponse {
        building_id: plan.building_id,
        from: plan.t0,
        to: plan.t1,
        speed: plan.speed,
        frames,
    }))
}

pub async fn serve(state: Arc<AppState>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
        .await
        .map_err(|e| anyhow!("binding port {port}: {e}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
