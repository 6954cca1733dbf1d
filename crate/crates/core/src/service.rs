//! JSON-over-HTTP session service.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State as AxState};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::TrainerConfig;
use crate::context::SearchContext;
use crate::corpus::{tokenize, Query, QrelTable};
use crate::error::Error;
use crate::metrics::MetricReport;
use crate::replay::FeedbackPool;
use crate::trainer::{evaluate, EvalMode, Model, OnlineSession};

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

/// Everything needed to rank: corpus context, model snapshot and settings.
pub struct Engine {
    pub ctx: SearchContext,
    pub model: Model,
    pub config: TrainerConfig,
    /// Known queries by normalized text, used to reuse their ids.
    pub known: BTreeMap<String, String>,
    /// Optional evaluation split reported by `/api/metrics`.
    pub eval: Option<(Vec<Query>, QrelTable)>,
}

impl Engine {
    pub fn new(ctx: SearchContext, model: Model, config: TrainerConfig, queries: &[Query]) -> Self {
        Engine {
            ctx,
            model,
            config,
            known: queries.iter().map(|q| (normalize(&q.text), q.query_id.clone())).collect(),
            eval: None,
        }
    }

    fn query_for(&self, text: &str) -> Option<Query> {
        let norm = normalize(text);
        if norm.is_empty() {
            return None;
        }
        let id = self.known.get(&norm).cloned().unwrap_or_else(|| format!("adhoc:{norm}"));
        Query::new(id, text.trim()).ok()
    }
}

fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

struct SessionEntry {
    session: OnlineSession,
    engine: Arc<Engine>,
    touched: Instant,
}

/// Shared service state.
pub struct AppState {
    engine: RwLock<Option<Arc<Engine>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<SessionEntry>>>>,
    pool: RwLock<FeedbackPool>,
    pool_path: Option<PathBuf>,
    ttl: Duration,
    created_total: AtomicU64,
    ended_total: AtomicU64,
    report: Mutex<Option<MetricReport>>,
}

impl AppState {
    pub fn new(engine: Option<Engine>, pool: FeedbackPool, pool_path: Option<PathBuf>, ttl: Duration) -> Arc<Self> {
        Arc::new(AppState {
            engine: RwLock::new(engine.map(Arc::new)),
            sessions: Mutex::new(HashMap::new()),
            pool: RwLock::new(pool),
            pool_path,
            ttl,
            created_total: AtomicU64::new(0),
            ended_total: AtomicU64::new(0),
            report: Mutex::new(None),
        })
    }

    /// Replaces the model snapshot; sessions keep the snapshot they began with.
    pub fn install(&self, engine: Engine) {
        *self.engine.write().expect("engine lock") = Some(Arc::new(engine));
        *self.report.lock().expect("report lock") = None;
    }

    fn engine(&self) -> Result<Arc<Engine>, ApiError> {
        self.engine
            .read()
            .expect("engine lock")
            .clone()
            .ok_or(ApiError::NotInitialized)
    }

    /// Drops sessions idle for longer than the TTL.
    pub fn evict_idle(&self) -> usize {
        let mut sessions = self.sessions.lock().expect("sessions lock");
        let before = sessions.len();
        sessions.retain(|_, s| s.lock().map(|e| e.touched.elapsed() < self.ttl).unwrap_or(false));
        before - sessions.len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionEntry>>, ApiError> {
        self.evict_idle();
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or(ApiError::UnknownSession)
    }
}

#[derive(Debug)]
enum ApiError {
    EmptyQuery,
    NotInitialized,
    UnknownSession,
    StaleFeedback,
    InvalidFeedback,
    BadRequest,
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::StaleFeedback(_) | Error::UnknownDocument(_) => ApiError::StaleFeedback,
            Error::InvalidFeedback(_) => ApiError::InvalidFeedback,
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(_: JsonRejection) -> Self {
        ApiError::BadRequest
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ApiError::EmptyQuery => (StatusCode::BAD_REQUEST, "empty_query"),
            ApiError::NotInitialized => (StatusCode::SERVICE_UNAVAILABLE, "not_initialized"),
            ApiError::UnknownSession => (StatusCode::NOT_FOUND, "unknown_session"),
            ApiError::StaleFeedback => (StatusCode::CONFLICT, "stale_feedback"),
            ApiError::InvalidFeedback => (StatusCode::CONFLICT, "invalid_feedback"),
            ApiError::BadRequest => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::Internal(msg) => {
                tracing::error!(%msg, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        (status, Json(json!({ "error": code }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultItem {
    pub doc_id: String,
    pub score: f64,
    pub selected_idx: usize,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub state_retrieved: bool,
    pub results: Vec<ResultItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub results: Vec<ResultItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndResponse {
    pub stored: bool,
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    query: String,
}

#[derive(Debug, Deserialize)]
struct FeedbackRequest {
    doc_id: String,
    sentence_idx: usize,
}

fn results(engine: &Engine, s: &OnlineSession) -> Vec<ResultItem> {
    s.slate
        .docs
        .iter()
        .zip(&s.slate.reps)
        .zip(&s.scores)
        .map(|((&d, &rep), &score)| {
            let doc = engine.ctx.doc(d);
            ResultItem {
                doc_id: doc.doc_id.clone(),
                score,
                selected_idx: rep,
                sentences: doc.sentences.iter().map(|s| s.text.clone()).collect(),
            }
        })
        .collect()
}

async fn create_session(
    AxState(app): AxState<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<Json<CreateResponse>, ApiError> {
    let Json(req) = body?;
    let engine = app.engine()?;
    let query = engine.query_for(&req.query).ok_or(ApiError::EmptyQuery)?;
    let session = {
        let pool = app.pool.read().expect("pool lock");
        OnlineSession::start(&engine.config, &engine.ctx, &engine.model, Some(&pool), query)?
    };
    let id = uuid::Uuid::new_v4().to_string();
    let resp = CreateResponse {
        session_id: id.clone(),
        state_retrieved: session.state_retrieved,
        results: results(&engine, &session),
    };
    app.sessions.lock().expect("sessions lock").insert(
        id,
        Arc::new(Mutex::new(SessionEntry {
            session,
            engine,
            touched: Instant::now(),
        })),
    );
    app.created_total.fetch_add(1, Ordering::Relaxed);
    Ok(Json(resp))
}

async fn post_feedback(
    AxState(app): AxState<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<FeedbackRequest>, JsonRejection>,
) -> Result<Json<FeedbackResponse>, ApiError> {
    let entry = app.session(&id)?;
    let Json(req) = body?;
    let mut e = entry.lock().expect("session lock");
    let engine = Arc::clone(&e.engine);
    e.session
        .feedback(&engine.config, &engine.ctx, &engine.model, &req.doc_id, req.sentence_idx)?;
    e.touched = Instant::now();
    Ok(Json(FeedbackResponse {
        results: results(&engine, &e.session),
    }))
}

async fn end_session(AxState(app): AxState<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<EndResponse>, ApiError> {
    app.evict_idle();
    let entry = app
        .sessions
        .lock()
        .expect("sessions lock")
        .remove(&id)
        .ok_or(ApiError::UnknownSession)?;
    let e = entry.lock().expect("session lock");
    let reward = e.session.reward(&e.engine.config, &e.engine.ctx, &e.engine.model)?;
    let mut pool = app.pool.write().expect("pool lock");
    let stored = pool.push_final_state(e.engine.ctx.encoder(), &e.session.state, reward);
    if stored {
        if let Some(path) = &app.pool_path {
            pool.save(path)?;
        }
    }
    app.ended_total.fetch_add(1, Ordering::Relaxed);
    Ok(Json(EndResponse { stored }))
}

async fn metrics(AxState(app): AxState<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    app.evict_idle();
    let report = match app.engine().ok().filter(|e| e.eval.is_some()) {
        Some(engine) => {
            let mut cached = app.report.lock().expect("report lock");
            if cached.is_none() {
                let (queries, qrels) = engine.eval.as_ref().expect("checked");
                let pool = app.pool.read().expect("pool lock").clone();
                *cached = Some(evaluate(
                    &engine.config,
                    &engine.ctx,
                    Some(&engine.model),
                    Some(&pool),
                    queries,
                    qrels,
                    EvalMode::Dqrank,
                )?);
            }
            cached.clone()
        }
        None => None,
    };
    let (ndcg, mrr, per_query) = match report {
        Some(r) => (json!(r.ndcg_at_10), json!(r.mrr), json!(r.per_query)),
        None => (serde_json::Value::Null, serde_json::Value::Null, json!({})),
    };
    Ok(Json(json!({
        "ndcg_at_10": ndcg,
        "mrr": mrr,
        "per_query": per_query,
        "pool_size": app.pool.read().expect("pool lock").len(),
        "active_sessions": app.sessions.lock().expect("sessions lock").len(),
        "created_total": app.created_total.load(Ordering::Relaxed),
        "ended_total": app.ended_total.load(Ordering::Relaxed),
    })))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/:id/feedback", post(post_feedback))
        .route("/api/session/:id", delete(end_session))
        .route("/api/metrics", get(metrics))
        .route("/api/healthz", get(healthz))
        .with_state(state)
}

/// Serves until `shutdown` resolves, evicting idle sessions once a minute.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweeper = Arc::clone(&state);
    let sweep = tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = sweeper.evict_idle();
            if n > 0 {
                tracing::info!(evicted = n, "dropped idle sessions");
            }
        }
    });
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "listening");
    let r = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    sweep.abort();
    r
}
