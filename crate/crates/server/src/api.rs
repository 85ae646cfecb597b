//! The HTTP API under `/api/v1`.

use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use synclay::infer::{resolve_layout, Engine, Provenance};
use synclay::synth::{LayoutParams, LayoutSynthesizer};
use synclay::{Error, LayoutJson, Vocabulary};

use crate::store::{LayoutStore, Page, StoreError, StoredLayout};

pub const DEFAULT_PAGE: usize = 20;
pub const MAX_PAGE: usize = 100;

/// Shared service state. Models are immutable once loaded; swapping the
/// checkpoint is an explicit call.
#[derive(Debug)]
pub struct AppState {
    engine: RwLock<Option<Arc<Engine>>>,
    pub store: LayoutStore,
    pub synthesizer: LayoutSynthesizer,
}

impl AppState {
    pub fn new(engine: Option<Engine>, store: LayoutStore) -> Self {
        Self {
            engine: RwLock::new(engine.map(Arc::new)),
            store,
            synthesizer: LayoutSynthesizer::default(),
        }
    }

    pub fn engine(&self) -> Option<Arc<Engine>> {
        self.engine.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Loads a checkpoint and makes it current for new requests.
    pub fn load_checkpoint(&self, dir: &Path) -> synclay::Result<String> {
        let engine = Engine::load(dir)?;
        let id = engine.checkpoint_id.clone();
        *self.engine.write().unwrap_or_else(|p| p.into_inner()) = Some(Arc::new(engine));
        Ok(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    /// Offending field, dotted from the request root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                path: None,
            },
        }
    }

    fn at(mut self, path: impl Into<String>) -> Self {
        self.body.path = Some(path.into());
        self
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    /// Maps a core error raised while handling the field `prefix`.
    fn from_core(e: Error, prefix: &str) -> Self {
        match e {
            Error::Layout { path, message } => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_layout", message).at(join(prefix, &path))
            }
            Error::Vocabulary(m) | Error::Unsupported(m) | Error::Geometry(m) | Error::Config(m) => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_request", m).at(prefix)
            }
            e @ Error::Placement { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "placement_failed", e.to_string()),
            e => Self::internal(e),
        }
    }
}

fn join(prefix: &str, path: &str) -> String {
    match (prefix.is_empty(), path.is_empty()) {
        (true, _) => path.into(),
        (_, true) => prefix.into(),
        _ => format!("{prefix}.{path}"),
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::Conflict { .. } => Self::new(StatusCode::CONFLICT, "version_conflict", e.to_string()),
            StoreError::Io { .. } => Self::internal(e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Wrapped {
            error: ErrorBody,
        }
        (self.status, Json(Wrapped { error: self.body })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON body with the failing field path on error.
fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let err = ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.inner().to_string());
        if path == "." {
            err
        } else {
            err.at(path)
        }
    })
}

/// Schema-checks a layout and returns its canonical wire form.
fn canonical(layout: LayoutJson, prefix: &str) -> ApiResult<LayoutJson> {
    resolve_layout(layout, 0)
        .map(|l| l.to_json())
        .map_err(|e| ApiError::from_core(e, prefix))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub checkpoint_loaded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_id: Option<String>,
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Health> {
    let engine = st.engine();
    Json(Health {
        status: "ok".into(),
        checkpoint_loaded: engine.is_some(),
        checkpoint_id: engine.map(|e| e.checkpoint_id.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeInfo {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypesResponse {
    pub types: Vec<TypeInfo>,
    /// Canvas side the loaded checkpoint draws; absent without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<usize>,
}

async fn types(State(st): State<Arc<AppState>>) -> Json<TypesResponse> {
    let engine = st.engine();
    let vocab = engine
        .as_ref()
        .map_or_else(Vocabulary::conic, |e| e.models.vocabulary().clone());
    Json(TypesResponse {
        types: vocab
            .names()
            .iter()
            .enumerate()
            .map(|(id, n)| TypeInfo { id, name: n.clone() })
            .collect(),
        image_size: engine.map(|e| e.models.generator.config.image_size),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateOptions {
    #[serde(default = "yes")]
    pub return_mask: bool,
    /// Noise seed for cells without one; random when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Fails with 409 unless this checkpoint is loaded.
    #[serde(default)]
    pub checkpoint_id: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub layout: LayoutJson,
    #[serde(default = "default_options")]
    pub options: GenerateOptions,
}

fn default_options() -> GenerateOptions {
    GenerateOptions {
        return_mask: true,
        ..GenerateOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub width: u32,
    pub height: u32,
    /// Base64 PNG.
    pub image_png: String,
    /// Base64 indexed PNG of class labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_png: Option<String>,
    pub provenance: Provenance,
}

async fn generate(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<GenerateResponse>> {
    let req: GenerateRequest = parse(&body)?;
    let seed = req.options.seed.unwrap_or_else(rand::random);
    let layout = resolve_layout(req.layout, seed).map_err(|e| ApiError::from_core(e, "layout"))?;
    let engine = st
        .engine()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_checkpoint", "no checkpoint is loaded"))?;
    if let Some(want) = req.options.checkpoint_id.filter(|w| *w != engine.checkpoint_id) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "checkpoint_mismatch",
            format!("checkpoint {want} requested, {} loaded", engine.checkpoint_id),
        )
        .at("options.checkpoint_id"));
    }
    engine
        .models
        .generator
        .check_layout(&layout)
        .map_err(|e| ApiError::from_core(e, "layout"))?;
    let pair = blocking(move || engine.generate(&layout, seed))
        .await?
        .map_err(ApiError::internal)?;
    let b64 = base64::engine::general_purpose::STANDARD;
    Ok(Json(GenerateResponse {
        width: pair.width,
        height: pair.height,
        image_png: b64.encode(&pair.image_png),
        mask_png: req.options.return_mask.then(|| b64.encode(&pair.mask_png)),
        provenance: pair.provenance,
    }))
}

async fn synthesize(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<LayoutJson>> {
    let params: LayoutParams = parse(&body)?;
    let st = st.clone();
    let s = blocking(move || st.synthesizer.synthesize(&params))
        .await?
        .map_err(|e| ApiError::from_core(e, ""))?;
    Ok(Json(s.layout.to_json()))
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ListQuery {
    #[serde(default)]
    pub offset: usize,
    #[serde(default)]
    pub limit: Option<usize>,
}

async fn list_layouts(State(st): State<Arc<AppState>>, Query(q): Query<ListQuery>) -> ApiResult<Json<Page>> {
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", format!("limit must be in 1..={MAX_PAGE}")).at("limit"));
    }
    Ok(Json(st.store.list(q.offset, limit)))
}

async fn create_layout(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<StoredLayout>)> {
    let layout = canonical(parse(&body)?, "")?;
    Ok((StatusCode::CREATED, Json(st.store.create(layout)?)))
}

async fn read_layout(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<StoredLayout>> {
    Ok(Json(st.store.get(&id)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateRequest {
    pub layout: LayoutJson,
    /// The version the edit was based on.
    pub version: u64,
}

async fn update_layout(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<StoredLayout>> {
    let req: UpdateRequest = parse(&body)?;
    let layout = canonical(req.layout, "layout")?;
    Ok(Json(st.store.update(&id, layout, req.version)?))
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct DeleteQuery {
    pub version: Option<u64>,
}

async fn delete_layout(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<DeleteQuery>,
) -> ApiResult<StatusCode> {
    st.store.delete(&id, q.version)?;
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/types", get(types))
        .route("/api/v1/generate", post(generate))
        .route("/api/v1/layouts/synthesize", post(synthesize))
        .route("/api/v1/layouts", get(list_layouts).post(create_layout))
        .route("/api/v1/layouts/{id}", get(read_layout).put(update_layout).delete(delete_layout))
        .with_state(state)
}
