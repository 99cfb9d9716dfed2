//! HTTP render service. Scenes are uploaded once, tweaked through small JSON
//! parameter patches and rendered by background jobs; a newer render request
//! for a scene cancels the older one.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use pixheight::channels::{ChannelStack, CHANNEL_NAMES};
use pixheight::io::{encode_gray8_auto, encode_rgb8, load_scene, LoadedScene, MemorySource, SceneDocument};
use pixheight::render::{render, render_channels, RenderParams};
use pixheight::{Control, Error};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Largest side of a preview render.
pub const PREVIEW_MAX_DIM: usize = 256;
/// Sample cap of a preview render.
pub const PREVIEW_MAX_SPP: u32 = 16;
const UPLOAD_LIMIT: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Preview,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Cancelled,
    Failed,
}

impl JobStatus {
    fn is_finished(self) -> bool {
        matches!(self, Self::Done | Self::Cancelled | Self::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightParams {
    pub u: f64,
    pub v: f64,
    pub h: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub glossiness: f64,
    pub eta: f64,
}

/// The editable parameters of an uploaded scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub lights: Vec<LightParams>,
    pub horizon: f64,
    pub materials: Vec<MaterialParams>,
    pub shadow_opacity: f32,
}

impl SceneParams {
    fn of(scene: &LoadedScene<f64>) -> Self {
        Self {
            lights: scene
                .lights
                .iter()
                .map(|l| LightParams {
                    u: l.center.u,
                    v: l.center.v,
                    h: l.center.h,
                    radius: l.radius,
                })
                .collect(),
            horizon: scene.camera.horizon_row(),
            materials: scene
                .materials
                .entries()
                .iter()
                .map(|(m, _)| MaterialParams {
                    glossiness: m.glossiness,
                    eta: m.eta,
                })
                .collect(),
            shadow_opacity: scene.render.shadow_opacity,
        }
    }

    /// `base` with these parameters substituted.
    fn apply(&self, base: &LoadedScene<f64>) -> LoadedScene<f64> {
        let mut s = base.clone();
        for (l, p) in s.lights.iter_mut().zip(&self.lights) {
            l.center.u = p.u;
            l.center.v = p.v;
            l.center.h = p.h;
            l.radius = p.radius;
        }
        s.camera = s.camera.set_horizon(self.horizon);
        for ((m, _), p) in s.materials.entries_mut().iter_mut().zip(&self.materials) {
            m.glossiness = p.glossiness;
            m.eta = p.eta;
        }
        s.render.shadow_opacity = self.shadow_opacity;
        s
    }
}

/// Body of `PATCH /scenes/{id}/params`. Absent fields are left unchanged.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsPatch {
    /// Revision the client last saw; a mismatch is a conflict.
    pub revision: Option<u64>,
    pub light: Option<LightPatch>,
    pub horizon: Option<f64>,
    pub material: Option<MaterialPatch>,
    pub shadow_opacity: Option<f32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightPatch {
    #[serde(default)]
    pub index: usize,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub h: Option<f64>,
    pub radius: Option<f64>,
}

/// Applies to every material unless `index` is given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialPatch {
    pub index: Option<usize>,
    pub glossiness: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

impl ParamsPatch {
    /// New parameters, or every problem found.
    fn apply_to(&self, current: &SceneParams, image_height: usize) -> Result<SceneParams, Vec<FieldError>> {
        let mut p = current.clone();
        let mut errs = Vec::new();
        if let Some(l) = &self.light {
            match p.lights.get_mut(l.index) {
                None => errs.push(field_error("light.index", format!("scene has {} lights", current.lights.len()))),
                Some(dst) => {
                    for (name, v, slot) in [("u", l.u, &mut dst.u), ("v", l.v, &mut dst.v)] {
                        if let Some(v) = v {
                            if v.is_finite() {
                                *slot = v;
                            } else {
                                errs.push(field_error(format!("light.{name}"), "must be finite"));
                            }
                        }
                    }
                    if let Some(h) = l.h {
                        if h > 0.0 && h.is_finite() {
                            dst.h = h;
                        } else {
                            errs.push(field_error("light.h", "must be > 0"));
                        }
                    }
                    if let Some(r) = l.radius {
                        if r >= 0.0 && r.is_finite() {
                            dst.radius = r;
                        } else {
                            errs.push(field_error("light.radius", "must be >= 0"));
                        }
                    }
                }
            }
        }
        if let Some(hz) = self.horizon {
            let hmax = image_height as f64;
            if hz.is_finite() && hz >= -hmax && hz < hmax {
                p.horizon = hz;
            } else {
                errs.push(field_error("horizon", format!("must lie in [-{hmax}, {hmax})")));
            }
        }
        if let Some(m) = &self.material {
            let targets: Vec<usize> = match m.index {
                Some(i) if i < p.materials.len() => vec![i],
                Some(_) => {
                    errs.push(field_error("material.index", format!("scene has {} materials", p.materials.len())));
                    vec![]
                }
                None if p.materials.is_empty() => {
                    errs.push(field_error("material", "scene has no materials"));
                    vec![]
                }
                None => (0..p.materials.len()).collect(),
            };
            if let Some(g) = m.glossiness {
                if !(0.0..=1.0).contains(&g) {
                    errs.push(field_error("material.glossiness", "must lie in [0, 1]"));
                }
            }
            if let Some(e) = m.eta {
                if !(e >= 1.0 && e.is_finite()) {
                    errs.push(field_error("material.eta", "must be >= 1"));
                }
            }
            for i in targets {
                if let Some(g) = m.glossiness {
                    p.materials[i].glossiness = g;
                }
                if let Some(e) = m.eta {
                    p.materials[i].eta = e;
                }
            }
        }
        if let Some(o) = self.shadow_opacity {
            if (0.0..=1.0).contains(&o) {
                p.shadow_opacity = o;
            } else {
                errs.push(field_error("shadow_opacity", "must lie in [0, 1]"));
            }
        }
        if errs.is_empty() {
            Ok(p)
        } else {
            Err(errs)
        }
    }
}

/// A finished render, served as a whole or not at all.
struct Published {
    job: String,
    revision: u64,
    tier: Tier,
    png: Vec<u8>,
}

struct SceneEntry {
    base: Arc<LoadedScene<f64>>,
    params: SceneParams,
    revision: u64,
    active_job: Option<String>,
    /// Held by the job that is rendering, so a scene's jobs run one at a time.
    render_lock: Arc<Mutex<()>>,
    result: Option<Arc<Published>>,
    channels: Option<(u64, Arc<ChannelStack>)>,
}

struct JobEntry {
    scene: String,
    tier: Tier,
    status: JobStatus,
    control: Arc<Control>,
    spp: u32,
    revision: u64,
    error: Option<String>,
}

impl JobEntry {
    fn to_json(&self, id: &str) -> Value {
        let done = match self.status {
            JobStatus::Done => self.spp as u64,
            _ => self.control.samples_done().min(self.spp as u64),
        };
        json!({
            "id": id,
            "scene": self.scene,
            "tier": self.tier,
            "status": self.status,
            "revision": self.revision,
            "spp_done": done,
            "spp_total": self.spp,
            "error": self.error,
        })
    }
}

#[derive(Default)]
struct Store {
    scenes: HashMap<String, SceneEntry>,
    jobs: HashMap<String, JobEntry>,
}

/// Shared service state: the in-memory scene and job store.
#[derive(Default)]
pub struct AppState {
    store: Mutex<Store>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1)
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// JSON error response.
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} {id:?}"))
    }

    fn validation(errors: Vec<FieldError>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": "validation failed", "errors": errors }),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn engine_error(e: Error) -> ApiError {
    match e {
        Error::Scene { location, field, message } => ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({
                "error": "validation failed",
                "errors": [{ "field": field, "message": message, "location": location }],
            }),
        },
        other => ApiError::validation(vec![field_error("<assets>", other.to_string())]),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/scenes", post(create_scene))
        .route("/scenes/{id}/params", patch(patch_params).get(get_params))
        .route("/scenes/{id}/render", post(start_render))
        .route("/scenes/{id}/result.png", get(result_png))
        .route("/scenes/{id}/channels/{file}", get(channel_png))
        .route("/jobs/{id}", get(get_job).delete(cancel_job))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .with_state(state)
}

/// Binds `addr` and serves until the process exits.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new())).await
}

/// Blocking wrapper around [`serve`] with its own multi-threaded runtime.
pub fn run(addr: SocketAddr) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr))
}

async fn healthz() -> &'static str {
    "ok"
}

/// `POST /scenes`: multipart form with a `scene` part (the scene document)
/// and one part per referenced asset, named by file name or field name.
async fn create_scene(State(st): State<Arc<AppState>>, mut form: Multipart) -> Result<Response, ApiError> {
    let mut doc_text = None;
    let mut src = MemorySource::default();
    loop {
        let field = match form.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return Err(ApiError::validation(vec![field_error("<multipart>", e.to_string())])),
        };
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::validation(vec![field_error(&name, e.to_string())]))?;
        if name == "scene" {
            let text = String::from_utf8(bytes.to_vec())
                .map_err(|_| ApiError::validation(vec![field_error("scene", "document is not UTF-8")]))?;
            doc_text = Some(text);
        } else {
            src.insert(file_name.unwrap_or(name), bytes.to_vec());
        }
    }
    let text = doc_text.ok_or_else(|| ApiError::validation(vec![field_error("scene", "missing scene document part")]))?;
    let loaded = tokio::task::spawn_blocking(move || -> Result<LoadedScene<f64>, Error> {
        let doc = SceneDocument::parse(&text, "scene")?;
        load_scene(&doc, &src)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(engine_error)?;

    let id = st.fresh_id("s");
    let params = SceneParams::of(&loaded);
    let (w, h) = loaded.camera.dims();
    let body = json!({ "id": id, "revision": 0, "width": w, "height": h, "params": params });
    st.store().scenes.insert(
        id,
        SceneEntry {
            base: Arc::new(loaded),
            params,
            revision: 0,
            active_job: None,
            render_lock: Arc::new(Mutex::new(())),
            result: None,
            channels: None,
        },
    );
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_params(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = st.store();
    let s = store.scenes.get(&id).ok_or_else(|| ApiError::not_found("scene", &id))?;
    Ok(Json(json!({ "id": id, "revision": s.revision, "params": s.params })))
}

async fn patch_params(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let patch: ParamsPatch =
        serde_json::from_slice(&body).map_err(|e| ApiError::validation(vec![field_error("<body>", e.to_string())]))?;
    let mut store = st.store();
    let s = store.scenes.get_mut(&id).ok_or_else(|| ApiError::not_found("scene", &id))?;
    if let Some(r) = patch.revision {
        if r != s.revision {
            return Err(ApiError {
                status: StatusCode::CONFLICT,
                body: json!({ "error": "revision conflict", "revision": s.revision }),
            });
        }
    }
    let next = patch
        .apply_to(&s.params, s.base.camera.image_height())
        .map_err(ApiError::validation)?;
    if next != s.params {
        s.params = next;
        s.revision += 1;
    }
    Ok(Json(json!({ "id": id, "revision": s.revision, "params": s.params })))
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    tier: Option<Tier>,
}

async fn start_render(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<RenderQuery>,
) -> Result<Response, ApiError> {
    let tier = q.tier.unwrap_or(Tier::Preview);
    let job_id = st.fresh_id("j");
    let control = Arc::new(Control::new());
    let (scene, params, revision, lock) = {
        let mut store = st.store();
        let s = store.scenes.get_mut(&id).ok_or_else(|| ApiError::not_found("scene", &id))?;
        let previous = s.active_job.replace(job_id.clone());
        let scene = s.params.apply(&s.base);
        let mut params = RenderParams::from_block(&scene.render);
        if tier == Tier::Preview {
            params.spp = params.spp.min(PREVIEW_MAX_SPP);
            params.max_dim = Some(PREVIEW_MAX_DIM);
        }
        let out = (scene, params, s.revision, s.render_lock.clone());
        if let Some(prev) = previous.and_then(|p| store.jobs.get_mut(&p)) {
            prev.control.cancel();
            if prev.status == JobStatus::Queued {
                prev.status = JobStatus::Cancelled;
            }
        }
        store.jobs.insert(
            job_id.clone(),
            JobEntry {
                scene: id.clone(),
                tier,
                status: JobStatus::Queued,
                control: control.clone(),
                spp: out.1.spp,
                revision: out.2,
                error: None,
            },
        );
        out
    };

    let st2 = st.clone();
    let job = job_id.clone();
    tokio::task::spawn_blocking(move || run_job(&st2, &job, &scene, &params, revision, tier, &lock, &control));
    let body = json!({ "job": job_id, "scene": id, "tier": tier, "revision": revision });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

#[allow(clippy::too_many_arguments)]
fn run_job(
    st: &AppState,
    job: &str,
    scene: &LoadedScene<f64>,
    params: &RenderParams,
    revision: u64,
    tier: Tier,
    lock: &Mutex<()>,
    control: &Control,
) {
    let _turn = lock.lock().unwrap_or_else(|e| e.into_inner());
    {
        let mut store = st.store();
        let Some(j) = store.jobs.get_mut(job) else { return };
        if control.is_cancelled() {
            j.status = JobStatus::Cancelled;
            return;
        }
        j.status = JobStatus::Running;
    }
    let outcome = render(scene, params, control).and_then(|out| encode_rgb8(&out.composite));
    let mut store = st.store();
    let scene_id = match store.jobs.get(job) {
        Some(j) => j.scene.clone(),
        None => return,
    };
    let latest = store
        .scenes
        .get(&scene_id)
        .is_some_and(|s| s.active_job.as_deref() == Some(job));
    let status = match outcome {
        Ok(png) if latest && !control.is_cancelled() => {
            if let Some(s) = store.scenes.get_mut(&scene_id) {
                s.result = Some(Arc::new(Published {
                    job: job.to_string(),
                    revision,
                    tier,
                    png,
                }));
            }
            (JobStatus::Done, None)
        }
        Ok(_) | Err(Error::Cancelled) => (JobStatus::Cancelled, None),
        Err(e) => (JobStatus::Failed, Some(e.to_string())),
    };
    if let Some(j) = store.jobs.get_mut(job) {
        j.status = status.0;
        j.error = status.1;
    }
}

async fn get_job(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = st.store();
    let j = store.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(j.to_json(&id)))
}

async fn cancel_job(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let mut store = st.store();
    let j = store.jobs.get_mut(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    if !j.status.is_finished() {
        j.control.cancel();
        if j.status == JobStatus::Queued {
            j.status = JobStatus::Cancelled;
        }
    }
    Ok(Json(j.to_json(&id)))
}

fn png_response(png: Vec<u8>, extra: &[(&'static str, String)]) -> Response {
    let mut resp = ([(header::CONTENT_TYPE, "image/png")], png).into_response();
    for (k, v) in extra {
        if let Ok(v) = v.parse() {
            resp.headers_mut().insert(*k, v);
        }
    }
    resp
}

async fn result_png(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let published = {
        let store = st.store();
        let s = store.scenes.get(&id).ok_or_else(|| ApiError::not_found("scene", &id))?;
        s.result
            .clone()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no completed render yet"))?
    };
    let tier = match published.tier {
        Tier::Preview => "preview",
        Tier::Final => "final",
    };
    Ok(png_response(
        published.png.clone(),
        &[
            ("x-render-job", published.job.clone()),
            ("x-render-revision", published.revision.to_string()),
            ("x-render-tier", tier.to_string()),
        ],
    ))
}

/// `GET /scenes/{id}/channels/{name}.png`: one buffer channel of the current
/// parameters, normalized to its own range for display.
async fn channel_png(
    State(st): State<Arc<AppState>>,
    Path((id, file)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let name = file
        .strip_suffix(".png")
        .filter(|n| CHANNEL_NAMES.contains(n))
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                format!("unknown channel {file:?}; expected one of {CHANNEL_NAMES:?} with .png"),
            )
        })?
        .to_string();
    let (cached, scene, revision) = {
        let store = st.store();
        let s = store.scenes.get(&id).ok_or_else(|| ApiError::not_found("scene", &id))?;
        let cached = s.channels.as_ref().filter(|(r, _)| *r == s.revision).map(|(_, c)| c.clone());
        (cached, s.params.apply(&s.base), s.revision)
    };
    let stack = match cached {
        Some(c) => c,
        None => {
            let params = RenderParams::from_block(&scene.render);
            let stack = tokio::task::spawn_blocking(move || render_channels(&scene, &params))
                .await
                .map_err(|e| ApiError::internal(e.to_string()))?
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
            let stack = Arc::new(stack);
            if let Some(s) = st.store().scenes.get_mut(&id) {
                if s.revision == revision {
                    s.channels = Some((revision, stack.clone()));
                }
            }
            stack
        }
    };
    let plane = stack.channel(&name).expect("channel names are fixed");
    let png = encode_gray8_auto(&plane).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(png_response(png, &[("x-channel-revision", revision.to_string())]))
}
