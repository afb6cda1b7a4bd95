//! HTTP ask-tell service. Each campaign lives in `<data_dir>/<id>/` as
//! `campaign.json` plus `history.csv`, both replaced atomically.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use crate::error::Error;
use crate::learner::{Campaign, CampaignConfig, ModelSummary, Suggestion};
use crate::qscore::QSPoint;

const STATE_FILE: &str = "campaign.json";

struct Entry {
    campaign: Arc<Mutex<Campaign>>,
    /// Last committed state, readable while a mutation is in flight.
    committed: RwLock<Arc<Campaign>>,
    fitting: AtomicBool,
}

pub struct AppState {
    dir: PathBuf,
    token: Option<String>,
    entries: Mutex<BTreeMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(dir: impl Into<PathBuf>, token: Option<String>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(AppState { dir, token: token.filter(|t| !t.is_empty()), entries: Mutex::new(BTreeMap::new()), next_id: AtomicU64::new(1) })
    }

    fn state_path(&self, id: &str) -> PathBuf {
        self.dir.join(id).join(STATE_FILE)
    }

    async fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::not_found(id));
        }
        let mut map = self.entries.lock().await;
        if let Some(e) = map.get(id) {
            return Ok(e.clone());
        }
        let path = self.state_path(id);
        if !path.exists() {
            return Err(ApiError::not_found(id));
        }
        let c = Campaign::load(&path).map_err(ApiError::from)?;
        let e = Arc::new(Entry {
            committed: RwLock::new(Arc::new(c.clone())),
            campaign: Arc::new(Mutex::new(c)),
            fitting: AtomicBool::new(false),
        });
        map.insert(id.to_string(), e.clone());
        Ok(e)
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown campaign {id:?}"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Invalid(_) | Error::Json(_) | Error::Csv(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Stopped(_) | Error::NotFitted => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub id: Option<String>,
    pub config: CampaignConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRequest {
    /// Raw-scale x and component-indexed order.
    pub point: QSPoint,
    pub y: f64,
    #[serde(default)]
    pub nonce: Option<String>,
    #[serde(default)]
    pub manual: bool,
}

/// Campaign document returned by the service.
#[derive(Debug, Serialize)]
pub struct CampaignView {
    #[serde(flatten)]
    pub campaign: Arc<Campaign>,
    pub fitting: bool,
    pub cumulative_best: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ObservationResponse {
    pub appended: bool,
    #[serde(flatten)]
    pub view: CampaignView,
}

fn view(entry: &Entry) -> CampaignView {
    let c = entry.committed.read().unwrap_or_else(|e| e.into_inner()).clone();
    CampaignView { cumulative_best: c.cumulative_best(), campaign: c, fitting: entry.fitting.load(Ordering::SeqCst) }
}

fn write_history(c: &Campaign, dir: &Path) -> crate::Result<()> {
    let tmp = dir.join("history.csv.tmp");
    c.write_history_csv(fs::File::create(&tmp)?)?;
    fs::rename(tmp, dir.join("history.csv"))?;
    Ok(())
}

/// Runs `f` on the campaign off the async executor, holding the
/// per-campaign writer lock, then publishes the committed state.
async fn mutate<T, F>(entry: Arc<Entry>, fitting: bool, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Campaign) -> crate::Result<T> + Send + 'static,
{
    let mut guard = entry.campaign.clone().lock_owned().await;
    if fitting {
        entry.fitting.store(true, Ordering::SeqCst);
    }
    let e2 = entry.clone();
    let out = tokio::task::spawn_blocking(move || {
        let r = f(&mut guard);
        let r = r.and_then(|v| {
            if let Some(dir) = guard.path().and_then(Path::parent) {
                write_history(&guard, dir)?;
            }
            Ok(v)
        });
        *e2.committed.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(guard.clone());
        r
    })
    .await;
    entry.fitting.store(false, Ordering::SeqCst);
    match out {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}"))),
    }
}

async fn create(State(st): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<CampaignView>), ApiError> {
    let req: CreateRequest = parse(&body)?;
    let mut map = st.entries.lock().await;
    let id = match req.id {
        Some(id) => {
            if !valid_id(&id) {
                return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "id must be 1-64 characters of [A-Za-z0-9_-]"));
            }
            if map.contains_key(&id) || st.state_path(&id).exists() {
                return Err(ApiError::new(StatusCode::CONFLICT, format!("campaign {id:?} already exists")));
            }
            id
        }
        None => loop {
            let id = format!("c{:04}", st.next_id.fetch_add(1, Ordering::SeqCst));
            if !map.contains_key(&id) && !st.state_path(&id).exists() {
                break id;
            }
        },
    };
    let path = st.state_path(&id);
    let cid = id.clone();
    let c = tokio::task::spawn_blocking(move || -> crate::Result<Campaign> {
        let mut c = Campaign::new(cid, req.config)?;
        fs::create_dir_all(path.parent().expect("campaign dir"))?;
        c.attach(&path)?;
        write_history(&c, path.parent().expect("campaign dir"))?;
        Ok(c)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let entry = Arc::new(Entry {
        committed: RwLock::new(Arc::new(c.clone())),
        campaign: Arc::new(Mutex::new(c)),
        fitting: AtomicBool::new(false),
    });
    map.insert(id, entry.clone());
    Ok((StatusCode::CREATED, Json(view(&entry))))
}

async fn get_campaign(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<CampaignView>, ApiError> {
    let e = st.entry(&id).await?;
    Ok(Json(view(&e)))
}

async fn suggestion(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Suggestion>, ApiError> {
    let e = st.entry(&id).await?;
    Ok(Json(mutate(e, false, |c| c.suggest()).await?))
}

async fn observe(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<ObservationResponse>, ApiError> {
    let e = st.entry(&id).await?;
    let req: ObservationRequest = parse(&body)?;
    if !req.y.is_finite() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "y must be finite"));
    }
    let appended = mutate(e.clone(), true, move |c| c.observe(&req.point, req.y, req.nonce.as_deref(), req.manual)).await?;
    Ok(Json(ObservationResponse { appended, view: view(&e) }))
}

async fn model(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<ModelSummary>, ApiError> {
    let e = st.entry(&id).await?;
    let mut c = (**e.committed.read().unwrap_or_else(|e| e.into_inner())).clone();
    let s = tokio::task::spawn_blocking(move || c.model_summary())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(s))
}

async fn auth(State(st): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &st.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/campaigns", post(create))
        .route("/campaigns/{id}", get(get_campaign))
        .route("/campaigns/{id}/suggestion", get(suggestion))
        .route("/campaigns/{id}/observations", post(observe))
        .route("/campaigns/{id}/model", get(model))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: std::net::SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
