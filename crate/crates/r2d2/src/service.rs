//! HTTP debate service.
//!
//! The graph and model are shared read-only; each request derives its own
//! random streams from the request seed. Debates live in an in-memory LRU
//! store so they can be continued; verdicts go to an append-only JSON-lines
//! file.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query as UrlQuery, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use r2d2_core::config::KeepAgents;
use r2d2_core::debate::Debater;
use r2d2_core::{DebateConfig, KnowledgeGraph, Model, Transcript, Triple};

use crate::checkpoint::Checkpoint;
use crate::report::{argument_views, query_view, ArgumentView, QueryView};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub debate: DebateConfig,
    /// Seed used when a request names none.
    pub seed: u64,
    pub threshold: f64,
    pub fingerprint: String,
    /// Debates kept for `/continue` and `/verdict`.
    pub store_capacity: usize,
    pub verdict_log: PathBuf,
    /// `None` allows any origin.
    pub allow_origin: Option<String>,
    pub max_rounds: usize,
    pub max_rollouts: usize,
}

impl ServiceConfig {
    pub fn from_checkpoint(ck: &Checkpoint, verdict_log: PathBuf) -> Self {
        Self {
            debate: ck.config.debate,
            seed: ck.config.seed,
            threshold: ck.threshold,
            fingerprint: ck.fingerprint.clone(),
            store_capacity: 1024,
            verdict_log,
            allow_origin: None,
            max_rounds: 20,
            max_rollouts: 200,
        }
    }
}

struct StoredDebate {
    /// All rollouts; the first is the one shown.
    transcripts: Vec<Transcript>,
}

struct AppState {
    kg: Arc<KnowledgeGraph>,
    model: Arc<Model>,
    config: ServiceConfig,
    debates: Mutex<LruCache<String, StoredDebate>>,
    verdicts: Mutex<()>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<r2d2_core::Error> for ApiError {
    fn from(e: r2d2_core::Error) -> Self {
        use r2d2_core::Error as E;
        let status = match e {
            E::UnknownEntity(_) | E::UnknownRelation(_) => StatusCode::NOT_FOUND,
            E::Config(_) | E::ArgumentCount { .. } | E::ArgumentLength { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

/// JSON body whose rejections are reported as 400 with a JSON message.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, e.body_text())),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebateRequest {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub rounds: Option<usize>,
    pub rollouts: Option<usize>,
    pub seed: Option<u64>,
    /// Vocabulary fingerprint the client was built against.
    pub fingerprint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateResponse {
    pub debate_id: String,
    pub query: QueryView,
    pub score: f64,
    pub threshold: f64,
    pub decision: bool,
    pub arguments: Vec<ArgumentView>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinueRequest {
    pub rounds: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinueResponse {
    pub debate_id: String,
    pub score: f64,
    pub threshold: f64,
    pub decision: bool,
    /// Only the arguments added by this call.
    pub arguments: Vec<ArgumentView>,
    pub total_arguments: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub rollouts: Option<usize>,
    pub seed: Option<u64>,
    /// `"both"`, `"1"` or `"2"`.
    pub keep_agent: Option<String>,
    pub fingerprint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub score: f64,
    pub threshold: f64,
    pub decision: bool,
    pub rollouts: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EntitiesQuery {
    #[serde(default)]
    pub prefix: String,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationsResponse {
    pub relations: Vec<String>,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRequest {
    pub debate_id: String,
    pub human_label: bool,
    pub overruled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub timestamp: String,
    pub debate_id: String,
    pub query: QueryView,
    pub model_score: f64,
    pub human_label: bool,
    pub overruled: bool,
}

impl AppState {
    fn check_fingerprint(&self, fp: &Option<String>) -> Result<(), ApiError> {
        match fp {
            Some(fp) if *fp != self.config.fingerprint => Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("vocabulary fingerprint {fp} does not match the loaded model"),
            )),
            _ => Ok(()),
        }
    }

    fn resolve(&self, s: &str, p: &str, o: &str) -> Result<Triple, ApiError> {
        let kg = &self.kg;
        let p = kg.relation(p)?;
        if kg.relations().is_inverse(p) || p == kg.relations().no_op() {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown relation `{}`", kg.relation_name(p))));
        }
        Ok(Triple::new(kg.entity(s)?, p, kg.entity(o)?))
    }

    fn bounded(&self, v: Option<usize>, default: usize, max: usize, what: &str) -> Result<usize, ApiError> {
        let v = v.unwrap_or(default);
        if v == 0 || v > max {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("{what} must be in 1..={max}")));
        }
        Ok(v)
    }

    fn mean_score(ts: &[Transcript]) -> f64 {
        ts.iter().map(|t| t.score).sum::<f64>() / ts.len() as f64
    }
}

type Shared = Arc<AppState>;

async fn debate(State(st): State<Shared>, Body(req): Body<DebateRequest>) -> Result<Json<DebateResponse>, ApiError> {
    st.check_fingerprint(&req.fingerprint)?;
    let query = st.resolve(&req.subject, &req.predicate, &req.object)?;
    let rounds = st.bounded(req.rounds, st.config.debate.rounds, st.config.max_rounds, "rounds")?;
    let rollouts = st.bounded(req.rollouts, 1, st.config.max_rollouts, "rollouts")?;
    let seed = req.seed.unwrap_or(st.config.seed);
    let debater = Debater::new(&st.kg, &st.model, &st.config.debate);
    let transcripts = (0..rollouts)
        .map(|k| {
            let s = r2d2_core::debate::rollout_seed(seed, &query, k, st.config.debate.mode);
            debater.run_with(&query, s, rounds, KeepAgents::Both)
        })
        .collect::<r2d2_core::Result<Vec<_>>>()?;
    let score = AppState::mean_score(&transcripts);
    let id = uuid::Uuid::new_v4().to_string();
    let response = DebateResponse {
        debate_id: id.clone(),
        query: query_view(&st.kg, &query),
        score,
        threshold: st.config.threshold,
        decision: score > st.config.threshold,
        arguments: argument_views(&st.kg, &transcripts[0], 0),
    };
    st.debates.lock().expect("debate store").put(id, StoredDebate { transcripts });
    Ok(Json(response))
}

async fn continue_debate(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Body(req): Body<ContinueRequest>,
) -> Result<Json<ContinueResponse>, ApiError> {
    let extra = st.bounded(req.rounds, 1, st.config.max_rounds, "rounds")?;
    let current = {
        let mut store = st.debates.lock().expect("debate store");
        let d = store.get(&id).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown debate `{id}`")))?;
        d.transcripts.clone()
    };
    if current[0].rounds() + extra > st.config.max_rounds {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("debates are limited to {} rounds", st.config.max_rounds)));
    }
    let debater = Debater::new(&st.kg, &st.model, &st.config.debate);
    let extended = current.iter().map(|t| debater.extend(t, extra)).collect::<r2d2_core::Result<Vec<_>>>()?;
    let score = AppState::mean_score(&extended);
    let before = current[0].arguments.len();
    let response = ContinueResponse {
        debate_id: id.clone(),
        score,
        threshold: st.config.threshold,
        decision: score > st.config.threshold,
        arguments: argument_views(&st.kg, &extended[0], before),
        total_arguments: extended[0].arguments.len(),
    };
    st.debates.lock().expect("debate store").put(id, StoredDebate { transcripts: extended });
    Ok(Json(response))
}

async fn classify(State(st): State<Shared>, Body(req): Body<ClassifyRequest>) -> Result<Json<ClassifyResponse>, ApiError> {
    st.check_fingerprint(&req.fingerprint)?;
    let query = st.resolve(&req.subject, &req.predicate, &req.object)?;
    let rollouts = st.bounded(
        req.rollouts,
        st.config.debate.rollouts_classification,
        st.config.max_rollouts,
        "rollouts",
    )?;
    let keep = match req.keep_agent.as_deref() {
        None => KeepAgents::Both,
        Some(k) => crate::config_file::parse_keep(k)
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "keep_agent must be `both`, `1` or `2`"))?,
    };
    let seed = req.seed.unwrap_or(st.config.seed);
    let debater = Debater::new(&st.kg, &st.model, &st.config.debate);
    let (score, _) = debater.classify_with_rollouts(&query, seed, rollouts, keep)?;
    Ok(Json(ClassifyResponse { score, threshold: st.config.threshold, decision: score > st.config.threshold, rollouts }))
}

async fn entities(State(st): State<Shared>, UrlQuery(q): UrlQuery<EntitiesQuery>) -> Json<Vec<String>> {
    let limit = q.limit.unwrap_or(20).min(1000);
    let mut names: Vec<&String> = st.kg.entities().names().iter().filter(|n| n.starts_with(&q.prefix)).collect();
    names.sort();
    Json(names.into_iter().take(limit).cloned().collect())
}

async fn relations(State(st): State<Shared>) -> Json<RelationsResponse> {
    let r = st.kg.relations();
    let relations = (0..r.base_count()).map(|i| r.name(r2d2_core::RelationId(i as u32)).to_string()).collect();
    Json(RelationsResponse { relations, fingerprint: st.config.fingerprint.clone() })
}

async fn verdict(State(st): State<Shared>, Body(req): Body<VerdictRequest>) -> Result<Json<VerdictRecord>, ApiError> {
    let (query, model_score) = {
        let mut store = st.debates.lock().expect("debate store");
        let d = store
            .get(&req.debate_id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown debate `{}`", req.debate_id)))?;
        (d.transcripts[0].query, AppState::mean_score(&d.transcripts))
    };
    let record = VerdictRecord {
        timestamp: chrono::Utc::now().to_rfc3339(),
        debate_id: req.debate_id,
        query: query_view(&st.kg, &query),
        model_score,
        human_label: req.human_label,
        overruled: req.overruled,
    };
    let line = serde_json::to_string(&record).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let _guard = st.verdicts.lock().expect("verdict log");
    let path = &st.config.verdict_log;
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| writeln!(f, "{line}"))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
    Ok(Json(record))
}

pub fn router(kg: Arc<KnowledgeGraph>, model: Arc<Model>, config: ServiceConfig) -> Router {
    let cors = match &config.allow_origin {
        Some(origin) => CorsLayer::new().allow_origin(AllowOrigin::exact(
            HeaderValue::from_str(origin).unwrap_or_else(|_| HeaderValue::from_static("null")),
        )),
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let capacity = NonZeroUsize::new(config.store_capacity.max(1)).expect("nonzero");
    let state = Arc::new(AppState {
        kg,
        model,
        config,
        debates: Mutex::new(LruCache::new(capacity)),
        verdicts: Mutex::new(()),
    });
    Router::new()
        .route("/debate", post(debate))
        .route("/debate/{id}/continue", post(continue_debate))
        .route("/classify", post(classify))
        .route("/entities", get(entities))
        .route("/relations", get(relations))
        .route("/verdict", post(verdict))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(addr: &str, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
