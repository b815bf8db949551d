//! HTTP session service.
//!
//! Every mutating request takes the session's exclusive lock, loads the
//! persisted record, advances it and writes it back before answering, so a
//! restart between any two calls is invisible to clients. Reads go straight
//! to the last persisted snapshot.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recourse_core::elicit::{Phase, Session, SessionContext};
use recourse_core::eval::GeneratorKind;
use recourse_core::{Error as CoreError, FeatureValue};
use tower_http::services::ServeDir;

use crate::api::{
    session_view, ActionSummary, ApiErrorBody, ChoiceRequest, CreateSessionRequest, DatasetSchema, DatasetSummary,
    SessionView, ViewMeta, SCHEMA_VERSION,
};
use crate::registry::{DatasetEntry, Registry};
use crate::store::{SessionRecord, SessionStore, StoredResponse, RECORD_VERSION};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        Self::internal(format!("{e:#}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ApiErrorBody { error: self.message })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    pub registry: Registry,
    pub store: SessionStore,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    rng: Mutex<ChaCha8Rng>,
}

impl AppState {
    /// `seed` makes session ids and default session seeds reproducible.
    pub fn new(registry: Registry, store: SessionStore, seed: Option<u64>) -> Self {
        let rng = match seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::from_os_rng(),
        };
        Self {
            registry,
            store,
            locks: Mutex::new(HashMap::new()),
            rng: Mutex::new(rng),
        }
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    fn fresh_id_and_seed(&self) -> (String, u64) {
        let mut rng = self.rng.lock().expect("rng poisoned");
        let id: u128 = rng.random();
        (format!("{id:032x}"), rng.random())
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default()
}

fn core_error(e: CoreError) -> ApiError {
    match e {
        CoreError::OutOfDomain { .. }
        | CoreError::UnknownFeature(_)
        | CoreError::StateArity { .. }
        | CoreError::Config(_)
        | CoreError::Schema(_) => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
        CoreError::NoFeasibleAction | CoreError::ForcedActionInfeasible(_) => {
            ApiError::new(StatusCode::CONFLICT, e.to_string())
        }
        CoreError::Session(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        other => ApiError::internal(other),
    }
}

fn context<'a>(entry: &'a DatasetEntry, kind: GeneratorKind) -> ApiResult<SessionContext<'a>> {
    let generator = entry.generator(kind).ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("generator `{}` is not available for dataset `{}`", crate::registry::kind_name(kind), entry.dataset.name),
        )
    })?;
    Ok(SessionContext {
        env: &entry.env,
        prior: &entry.dataset.prior,
        generator,
    })
}

fn view_of(entry: &DatasetEntry, record: &SessionRecord) -> SessionView {
    session_view(
        &entry.env.problem,
        &record.session,
        ViewMeta {
            id: &record.id,
            dataset: &record.dataset,
            generator: record.generator,
            created_at: record.created_at,
            updated_at: record.updated_at,
        },
    )
}

fn entry_for(state: &AppState, dataset: &str) -> ApiResult<Arc<DatasetEntry>> {
    state
        .registry
        .get(dataset)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown dataset `{dataset}`")))
}

pub fn create_session(state: &AppState, req: CreateSessionRequest) -> ApiResult<SessionView> {
    let entry = entry_for(state, &req.dataset)?;
    let problem = &entry.env.problem;
    let s0 = problem
        .schema
        .state_from_pairs(req.features.iter().map(|(k, v): (&String, &FeatureValue)| (k.as_str(), v.clone())))
        .map_err(core_error)?;
    if entry.env.is_favorable(&s0) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "the profile already receives the favorable decision",
        ));
    }
    if problem.feasible_actions(&s0).is_empty() {
        return Err(core_error(CoreError::NoFeasibleAction));
    }
    let kind = req.generator.unwrap_or(entry.dataset.experiment.generator);
    let ctx = context(&entry, kind)?;
    let (id, default_seed) = state.fresh_id_and_seed();
    let mut config = entry.dataset.session.clone();
    if let Some(q) = req.q {
        config.budget = q;
    }
    if let Some(k) = req.k {
        config.set_size = k;
    }
    config.seed = req.seed.unwrap_or(default_seed);
    let session = Session::start(ctx, s0, config).map_err(core_error)?;
    let t = now();
    let record = SessionRecord {
        schema_version: RECORD_VERSION,
        id,
        dataset: entry.dataset.name.clone(),
        generator: kind,
        created_at: t,
        updated_at: t,
        session,
        responses: Vec::new(),
    };
    state.store.put(&record)?;
    tracing::info!(session = %record.id, dataset = %record.dataset, "session created");
    Ok(view_of(&entry, &record))
}

pub fn submit_choice(state: &AppState, id: &str, req: ChoiceRequest) -> ApiResult<SessionView> {
    let lock = state.lock_for(id);
    let _guard = lock.lock().expect("session lock poisoned");
    let mut record = state
        .store
        .get(id)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))?;
    let round = record.session.round;
    if let Some(r) = req.round {
        if r < round || (r == round && record.session.is_finalized()) {
            return match record.responses.iter().find(|s| s.round == r) {
                Some(s) if s.index == req.index => Ok(s.view.clone()),
                Some(s) => Err(ApiError::new(
                    StatusCode::CONFLICT,
                    format!("round {r} was already answered with choice {}", s.index),
                )),
                None => Err(ApiError::new(StatusCode::CONFLICT, format!("round {r} is not open"))),
            };
        }
        if r > round {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("round {r} is not open; the session is at round {round}"),
            ));
        }
    }
    let set_len = match &record.session.phase {
        Phase::AwaitingChoice { set } => set.len(),
        _ => return Err(ApiError::new(StatusCode::CONFLICT, "the session is already finalized")),
    };
    if req.index >= set_len {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("choice {} is outside a set of {set_len} items", req.index),
        ));
    }
    let entry = entry_for(state, &record.dataset)?;
    let ctx = context(&entry, record.generator)?;
    record.session.choose(ctx, req.index).map_err(core_error)?;
    record.updated_at = now();
    let view = view_of(&entry, &record);
    record.responses.push(StoredResponse {
        round,
        index: req.index,
        view: view.clone(),
    });
    state.store.put(&record)?;
    Ok(view)
}

pub fn get_session(state: &AppState, id: &str) -> ApiResult<SessionView> {
    let record = state
        .store
        .get(id)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))?;
    let entry = entry_for(state, &record.dataset)?;
    Ok(view_of(&entry, &record))
}

pub fn list_datasets(state: &AppState) -> Vec<DatasetSummary> {
    state
        .registry
        .iter()
        .map(|e| DatasetSummary {
            name: e.dataset.name.clone(),
            description: e.dataset.description.clone(),
            generators: e.available(),
            trained: e.trained,
            default_q: e.dataset.session.budget,
            default_k: e.dataset.session.set_size,
        })
        .collect()
}

pub fn dataset_schema(state: &AppState, name: &str) -> ApiResult<DatasetSchema> {
    let entry = entry_for(state, name)?;
    let problem = &entry.env.problem;
    Ok(DatasetSchema {
        schema_version: SCHEMA_VERSION,
        name: entry.dataset.name.clone(),
        features: problem.schema.features().to_vec(),
        actions: problem
            .catalog
            .functions()
            .iter()
            .enumerate()
            .map(|(fi, f)| ActionSummary {
                name: f.name.clone(),
                target: problem.schema.feature(f.target).name.clone(),
                arguments: (0..f.arguments.len())
                    .map(|x| problem.catalog.label(recourse_core::Action::new(fi, x), &problem.schema))
                    .collect(),
                precondition: f.precondition.render(&problem.schema),
            })
            .collect(),
    })
}

async fn blocking<T, F>(state: Arc<AppState>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(ApiError::internal)?
}

async fn post_sessions(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSessionRequest>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let view = blocking(state, move |s| create_session(s, req)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn post_choice(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ChoiceRequest>,
) -> ApiResult<Json<SessionView>> {
    Ok(Json(blocking(state, move |s| submit_choice(s, &id, req)).await?))
}

async fn get_session_handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    Ok(Json(blocking(state, move |s| get_session(s, &id)).await?))
}

async fn get_datasets(State(state): State<Arc<AppState>>) -> Json<Vec<DatasetSummary>> {
    Json(list_datasets(&state))
}

async fn get_schema(State(state): State<Arc<AppState>>, Path(name): Path<String>) -> ApiResult<Json<DatasetSchema>> {
    Ok(Json(dataset_schema(&state, &name)?))
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(post_sessions))
        .route("/sessions/{id}", get(get_session_handler))
        .route("/sessions/{id}/choice", post(post_choice))
        .route("/datasets", get(get_datasets))
        .route("/datasets/{name}/schema", get(get_schema))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
