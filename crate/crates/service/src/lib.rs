//! HTTP/JSON front end for interactive optimization sessions.
//!
//! Every state transition is written to `{data_dir}/{id}.json` before the
//! response is sent, so a restarted server picks up exactly where it stopped,
//! including a pair that was served but not yet answered.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coexbo_core::engine::{self, IterationRecord, SessionConfig, SessionState};
use coexbo_core::explain::{ExplanationBundle, Feedback};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

pub const SCHEMA_HEADER: &str = "x-coexbo-schema";
pub const API_SCHEMA: &str = "1";
pub const BIND_ENV: &str = "COEXBO_BIND";
pub const DATA_DIR_ENV: &str = "COEXBO_DATA_DIR";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "coexbo-data";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    pub created_at_ms: u64,
    pub config: SessionConfig,
    pub path: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    handle: SessionHandle,
    idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesResponse {
    pub t: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub explanation: Option<ExplanationBundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRequest {
    pub choice: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResponse {
    pub feedback: Feedback,
    pub observed_y: f64,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String, Vec<FieldError>),
    #[error("session '{0}' not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl From<coexbo_core::Error> for ApiError {
    fn from(e: coexbo_core::Error) -> Self {
        use coexbo_core::Error as E;
        match e {
            E::State(m) => ApiError::Conflict(m),
            e @ (E::Input(_) | E::Dimension { .. } | E::Parse { .. } | E::Degenerate(_) | E::Unsupported(_)) => {
                ApiError::BadRequest(e.to_string(), Vec::new())
            }
            e => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, fields) = match &self {
            ApiError::BadRequest(_, f) => (StatusCode::BAD_REQUEST, "bad_request", f.clone()),
            ApiError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", Vec::new()),
            ApiError::Conflict(_) => (StatusCode::CONFLICT, "conflict", Vec::new()),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", Vec::new()),
        };
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = ErrorBody { code: code.into(), message: self.to_string(), fields };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

struct Entry {
    handle: SessionHandle,
    state: SessionState,
}

/// Shared server state: the session table and the data directory.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    /// Held across session creation so a repeated key cannot race its first use.
    idempotency: Mutex<HashMap<String, String>>,
}

fn state_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

fn meta_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.meta.json"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

impl AppState {
    /// Opens (creating if needed) `data_dir` and loads every persisted session.
    pub fn open(data_dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let data_dir = data_dir.into();
        std::fs::create_dir_all(&data_dir)?;
        let mut sessions = HashMap::new();
        let mut keys = HashMap::new();
        for entry in std::fs::read_dir(&data_dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            let Some(id) = name.strip_suffix(".meta.json") else { continue };
            let loaded = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<Meta>(&t).map_err(|e| e.to_string()))
                .and_then(|m| {
                    engine::load_session(&state_path(&data_dir, id)).map(|s| (m, s)).map_err(|e| e.to_string())
                });
            match loaded {
                Ok((meta, state)) => {
                    if let Some(k) = meta.idempotency_key {
                        keys.insert(k, id.to_string());
                    }
                    sessions.insert(id.to_string(), Arc::new(Mutex::new(Entry { handle: meta.handle, state })));
                }
                Err(e) => tracing::warn!(session = id, error = %e, "skipping unreadable session"),
            }
        }
        tracing::info!(count = sessions.len(), dir = %data_dir.display(), "sessions loaded");
        Ok(Self {
            inner: Arc::new(Inner { data_dir, sessions: RwLock::new(sessions), idempotency: Mutex::new(keys) }),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.data_dir
    }

    async fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        self.inner.sessions.read().await.get(id).cloned().ok_or_else(|| ApiError::NotFound(id.to_string()))
    }
}

fn persist(dir: &Path, entry: &Entry) -> ApiResult<()> {
    engine::save_session(&entry.state, &state_path(dir, &entry.handle.id)).map_err(|e| ApiError::Internal(e.to_string()))
}

fn config_errors(cfg: &SessionConfig) -> Vec<FieldError> {
    cfg.problems().into_iter().map(|(f, m)| FieldError { field: f.to_string(), message: m }).collect()
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::BadRequest(
            "malformed request body".into(),
            vec![FieldError { field: "body".into(), message: e.to_string() }],
        )
    })
}

async fn create_session(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let cfg: SessionConfig = parse_json(&body)?;
    let problems = config_errors(&cfg);
    if !problems.is_empty() {
        return Err(ApiError::BadRequest("invalid session config".into(), problems));
    }
    let key = headers.get("idempotency-key").and_then(|v| v.to_str().ok()).map(str::to_string);
    let mut keys = app.inner.idempotency.lock().await;
    if let Some(id) = key.as_ref().and_then(|k| keys.get(k)) {
        let entry = app.session(id).await?;
        let handle = entry.lock().await.handle.clone();
        if handle.config != cfg {
            return Err(ApiError::Conflict("idempotency key was used with a different config".into()));
        }
        return Ok((StatusCode::CREATED, Json(handle)).into_response());
    }

    let id = uuid::Uuid::new_v4().simple().to_string();
    let dir = app.inner.data_dir.clone();
    let handle = SessionHandle { id: id.clone(), created_at_ms: now_ms(), config: cfg.clone(), path: state_path(&dir, &id) };
    let meta = Meta { handle: handle.clone(), idempotency_key: key.clone() };
    let entry = blocking(move || {
        let state = engine::init_session(cfg)?;
        let entry = Entry { handle: meta.handle.clone(), state };
        persist(&dir, &entry)?;
        let text = serde_json::to_vec_pretty(&meta).map_err(|e| ApiError::Internal(e.to_string()))?;
        write_atomic(&meta_path(&dir, &meta.handle.id), &text).map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(entry)
    })
    .await?;
    app.inner.sessions.write().await.insert(id.clone(), Arc::new(Mutex::new(entry)));
    if let Some(k) = key {
        keys.insert(k, id.clone());
    }
    tracing::info!(session = %id, "session created");
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

async fn get_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionHandle>> {
    Ok(Json(app.session(&id).await?.lock().await.handle.clone()))
}

async fn get_candidates(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<CandidatesResponse>> {
    let mut guard = app.session(&id).await?.lock_owned().await;
    let dir = app.inner.data_dir.clone();
    blocking(move || {
        let entry = &mut *guard;
        if entry.state.pending.is_none() {
            entry.state.step_candidates()?;
            persist(&dir, entry)?;
        }
        let p = entry.state.pending.as_ref().expect("pending pair present");
        Ok(Json(CandidatesResponse { t: entry.state.t, x1: p.x1.clone(), x2: p.x2.clone(), explanation: p.explanation.clone() }))
    })
    .await
}

async fn post_choice(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<ChoiceResponse>> {
    let entry = app.session(&id).await?;
    let req: ChoiceRequest = parse_json(&body)?;
    if req.choice != 1 && req.choice != 2 {
        return Err(ApiError::BadRequest(
            "invalid choice".into(),
            vec![FieldError { field: "choice".into(), message: "must be 1 or 2".into() }],
        ));
    }
    let mut guard = entry.lock_owned().await;
    let dir = app.inner.data_dir.clone();
    blocking(move || {
        let entry = &mut *guard;
        let out = entry.state.apply_choice(req.choice)?;
        persist(&dir, entry)?;
        Ok(Json(ChoiceResponse { feedback: out.feedback, observed_y: out.observed_y, t: out.t }))
    })
    .await
}

async fn get_history(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Vec<IterationRecord>>> {
    Ok(Json(app.session(&id).await?.lock().await.state.history.clone()))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn schema_header(mut res: Response) -> Response {
    res.headers_mut().insert(SCHEMA_HEADER, HeaderValue::from_static(API_SCHEMA));
    res
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/candidates", get(get_candidates))
        .route("/sessions/{id}/choice", post(post_choice))
        .route("/sessions/{id}/history", get(get_history))
        .layer(axum::middleware::map_response(schema_header))
        .with_state(app)
}

/// Bind address and data directory from the environment, with defaults.
pub fn env_settings() -> (String, PathBuf) {
    let bind = std::env::var(BIND_ENV).unwrap_or_else(|_| DEFAULT_BIND.to_string());
    let dir = std::env::var(DATA_DIR_ENV).unwrap_or_else(|_| DEFAULT_DATA_DIR.to_string());
    (bind, PathBuf::from(dir))
}

pub async fn serve(bind: &str, data_dir: PathBuf) -> std::io::Result<()> {
    let addr: SocketAddr = bind
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad bind address '{bind}': {e}")))?;
    let app = AppState::open(data_dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(app)).await
}
