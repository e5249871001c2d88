//! HTTP/JSON service: collection sessions for paired crowd workers and the
//! offline operations of the command-line tool.
//!
//! Sessions hand out two capability tokens at creation, one per role. The
//! token in the `Authorization: Bearer` header decides what a caller may see
//! and do.

pub mod ops;
pub mod session;
pub mod world;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mgdial_core::eval::{Curve, EvalReport, LodoTable};
use mgdial_core::manual_kit::search;
use mgdial_protocol::ops as wire;
use mgdial_protocol::session::{
    CallAccepted, ChecklistState, ChecklistUpdate, CollectedCorpus, CreateSession, EventLog,
    Finalized, GoalList, ManualHit, ManualList, MessageAccepted, PostMessage, Role, SearchResults,
    SelectInstructions, SelectionAccepted, SessionCreated, SessionExport, SessionList, SessionView,
    SubmitCall,
};
use mgdial_protocol::session::{Event, Phase};
use mgdial_protocol::{ErrorBody, ErrorKind, Health, Versioned, API_VERSION};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ops::OpError;
use crate::session::{default_dialogue_id, default_seed, Session, SessionError};
use crate::world::World;

/// Upload limit; evaluation requests carry whole corpora.
pub const BODY_LIMIT: usize = 512 * 1024 * 1024;

/// Default number of manual search hits.
pub const DEFAULT_SEARCH_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind:?}: {message}")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ApiError {
            kind,
            message: message.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::new(e.kind(), e.to_string())
    }
}

impl From<OpError> for ApiError {
    fn from(e: OpError) -> Self {
        ApiError::new(ErrorKind::Operation, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(ErrorKind::Schema, e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(ErrorKind::Schema, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.kind.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (
            status,
            Json(Versioned::new(ErrorBody {
                error: self.kind,
                message: self.message,
            })),
        )
            .into_response()
    }
}

/// JSON request body with an optional `version` that must match.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let Json(v) = Json::<Versioned<T>>::from_request(req, state).await?;
        if v.version != API_VERSION {
            return Err(ApiError::new(
                ErrorKind::Version,
                format!("api version {} is not {API_VERSION}", v.version),
            ));
        }
        Ok(Body(v.body))
    }
}

/// Versioned JSON reply.
pub struct Reply<T>(pub T);

impl<T: Serialize> IntoResponse for Reply<T> {
    fn into_response(self) -> Response {
        Json(Versioned::new(self.0)).into_response()
    }
}

type ApiResult<T> = Result<Reply<T>, ApiError>;

struct Entry {
    session: Mutex<Session>,
}

/// Shared service state.
pub struct AppState {
    world: Arc<World>,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    tokens: RwLock<HashMap<String, (String, Role)>>,
    collected: Mutex<Vec<SessionExport>>,
}

impl AppState {
    pub fn new(world: World) -> Arc<Self> {
        Arc::new(AppState {
            world: Arc::new(world),
            sessions: RwLock::new(HashMap::new()),
            tokens: RwLock::new(HashMap::new()),
            collected: Mutex::new(Vec::new()),
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(ErrorKind::NotFound, format!("no session '{id}'")))
    }

    /// Role of the bearer of `headers` in session `id`.
    fn role(&self, id: &str, headers: &HeaderMap) -> Result<Role, ApiError> {
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(|| ApiError::new(ErrorKind::Unauthorized, "missing bearer token"))?;
        let tokens = self.tokens.read().expect("token table lock");
        match tokens.get(token.trim()) {
            None => Err(ApiError::new(ErrorKind::Unauthorized, "unknown token")),
            Some((s, _)) if s != id => Err(ApiError::new(
                ErrorKind::Forbidden,
                "token belongs to another session",
            )),
            Some((_, role)) => Ok(*role),
        }
    }

    /// Runs `f` on session `id` for a caller holding one of `roles`.
    fn with_session<T>(
        &self,
        id: &str,
        headers: &HeaderMap,
        roles: &[Role],
        f: impl FnOnce(&mut Session, &World, Role) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let entry = self.entry(id)?;
        let role = self.role(id, headers)?;
        if !roles.contains(&role) {
            return Err(ApiError::new(
                ErrorKind::Forbidden,
                format!("not allowed for the {role:?} role"),
            ));
        }
        let mut session = entry.session.lock().expect("session lock");
        f(&mut session, &self.world, role)
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionCreated, ApiError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dialogue = match &req.label {
            Some(l) if l.trim().is_empty() => {
                return Err(ApiError::new(ErrorKind::Validation, "label is empty"))
            }
            Some(l) => l.as_str().into(),
            None => default_dialogue_id(&id),
        };
        let seed = req.seed.unwrap_or_else(|| default_seed(&dialogue));
        let created = Event::Created {
            dialogue: dialogue.clone(),
            goal: req.goal.clone(),
            manual: req.manual.clone(),
            seed,
        };
        let session = Session::create(&self.world, &id, created)?;
        let user_token = uuid::Uuid::new_v4().simple().to_string();
        let agent_token = uuid::Uuid::new_v4().simple().to_string();
        {
            let mut tokens = self.tokens.write().expect("token table lock");
            tokens.insert(user_token.clone(), (id.clone(), Role::User));
            tokens.insert(agent_token.clone(), (id.clone(), Role::Agent));
        }
        self.sessions.write().expect("session table lock").insert(
            id.clone(),
            Arc::new(Entry {
                session: Mutex::new(session),
            }),
        );
        log::info!(
            "session {id} opened for goal {} with manual {}",
            req.goal,
            req.manual
        );
        Ok(SessionCreated {
            session: id,
            dialogue,
            user_token,
            agent_token,
        })
    }
}

pub type Shared = Arc<AppState>;

async fn health(State(app): State<Shared>) -> ApiResult<Health> {
    let sessions = app.sessions.read().expect("session table lock").len();
    Ok(Reply(Health {
        status: "ok".into(),
        sessions,
    }))
}

async fn create_session(
    State(app): State<Shared>,
    Body(req): Body<CreateSession>,
) -> Result<Response, ApiError> {
    let created = app.create_session(&req)?;
    Ok((StatusCode::CREATED, Reply(created)).into_response())
}

async fn list_sessions(State(app): State<Shared>) -> ApiResult<SessionList> {
    let entries: Vec<Arc<Entry>> = app
        .sessions
        .read()
        .expect("session table lock")
        .values()
        .cloned()
        .collect();
    let mut sessions: Vec<_> = entries
        .iter()
        .map(|e| e.session.lock().expect("session lock").summary())
        .collect();
    sessions.sort_by(|a, b| a.session.cmp(&b.session));
    Ok(Reply(SessionList { sessions }))
}

async fn view(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<SessionView> {
    app.with_session(
        &id,
        &headers,
        &[Role::User, Role::Agent],
        |s, world, role| {
            Ok(Reply(match role {
                Role::User => SessionView::User(s.user_view()),
                Role::Agent => SessionView::Agent(s.agent_view(world)),
            }))
        },
    )
}

async fn post_message(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<PostMessage>,
) -> ApiResult<MessageAccepted> {
    app.with_session(
        &id,
        &headers,
        &[Role::User, Role::Agent],
        |s, world, role| {
            let (turn, flagged) = s.post_message(world, role, &req.text)?;
            Ok(Reply(MessageAccepted {
                turn,
                phase: s.phase(),
                flagged,
            }))
        },
    )
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    q: String,
    k: Option<usize>,
}

async fn search_manual(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> ApiResult<SearchResults> {
    let Query(params) = params?;
    app.with_session(&id, &headers, &[Role::Agent], |s, world, _| {
        let manual = &world.manuals[s.manual()];
        let hits = search(
            &world.indexes[s.manual()],
            &params.q,
            params.k.unwrap_or(DEFAULT_SEARCH_K),
        )
        .map_err(|e| ApiError::new(ErrorKind::Validation, e.to_string()))?;
        let hits = hits
            .into_iter()
            .filter_map(|h| {
                manual.get(&h.instruction).map(|i| ManualHit {
                    instruction: i.clone(),
                    score: h.score,
                })
            })
            .collect();
        Ok(Reply(SearchResults {
            query: params.q.clone(),
            hits,
        }))
    })
}

async fn select(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<SelectInstructions>,
) -> ApiResult<SelectionAccepted> {
    app.with_session(&id, &headers, &[Role::Agent], |s, world, _| {
        let turn = s.select(world, &req.instructions)?;
        Ok(Reply(SelectionAccepted {
            turn,
            selected: req.instructions.clone(),
        }))
    })
}

async fn call_api(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<SubmitCall>,
) -> ApiResult<CallAccepted> {
    app.with_session(&id, &headers, &[Role::Agent], |s, world, _| {
        let (turn, result) = s.call(world, &req.call)?;
        Ok(Reply(CallAccepted { turn, result }))
    })
}

async fn checklist(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<ChecklistState> {
    app.with_session(&id, &headers, &[Role::User], |s, _, _| {
        Ok(Reply(ChecklistState {
            checklist: s.checklist().clone(),
            complete: s.checklist().is_complete(),
        }))
    })
}

async fn update_checklist(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<ChecklistUpdate>,
) -> ApiResult<ChecklistState> {
    app.with_session(&id, &headers, &[Role::User], |s, world, _| {
        s.update_checklist(world, req)?;
        Ok(Reply(ChecklistState {
            checklist: s.checklist().clone(),
            complete: s.checklist().is_complete(),
        }))
    })
}

async fn finalize(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Finalized> {
    let (outcome, export) = app.with_session(&id, &headers, &[Role::User], |s, world, _| {
        let outcome = s.finalize(world)?;
        Ok((outcome, s.export().cloned()))
    })?;
    if let Some(export) = export {
        app.collected.lock().expect("corpus lock").push(export);
    }
    Ok(Reply(outcome))
}

async fn reopen(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<MessageAccepted> {
    app.with_session(
        &id,
        &headers,
        &[Role::User, Role::Agent],
        |s, world, role| {
            s.reopen(world, role)?;
            Ok(Reply(MessageAccepted {
                turn: s.user_view().turns.len(),
                phase: s.phase(),
                flagged: false,
            }))
        },
    )
}

async fn export(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<SessionExport> {
    app.with_session(
        &id,
        &headers,
        &[Role::User, Role::Agent],
        |s, _, _| match s.export() {
            Some(e) if s.phase() == Phase::Completed => Ok(Reply(e.clone())),
            _ => Err(ApiError::new(
                ErrorKind::Sequence,
                "session is not completed",
            )),
        },
    )
}

async fn events(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<EventLog> {
    app.with_session(&id, &headers, &[Role::User, Role::Agent], |s, _, _| {
        Ok(Reply(EventLog {
            session: s.id().to_string(),
            events: s.events().to_vec(),
        }))
    })
}

async fn corpus(State(app): State<Shared>) -> ApiResult<CollectedCorpus> {
    Ok(Reply(CollectedCorpus {
        dialogues: app.collected.lock().expect("corpus lock").clone(),
    }))
}

async fn goals(State(app): State<Shared>) -> ApiResult<GoalList> {
    Ok(Reply(GoalList {
        goals: app.world.goals.keys().cloned().collect(),
    }))
}

async fn manuals(State(app): State<Shared>) -> ApiResult<ManualList> {
    Ok(Reply(ManualList {
        manuals: app.world.manuals.keys().cloned().collect(),
    }))
}

/// Runs a blocking operation off the async workers.
async fn blocking<Q, T>(req: Q, f: fn(&Q) -> Result<T, OpError>) -> ApiResult<T>
where
    Q: Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&req))
        .await
        .map_err(|e| ApiError::new(ErrorKind::Internal, e.to_string()))?
        .map(Reply)
        .map_err(ApiError::from)
}

macro_rules! op_route {
    ($name:ident, $req:ty, $res:ty, $f:path) => {
        async fn $name(Body(req): Body<$req>) -> ApiResult<$res> {
            blocking(req, $f).await
        }
    };
}

op_route!(op_gen_db, wire::GenDb, wire::GeneratedDb, ops::gen_db);
op_route!(
    op_gen_goals,
    wire::GenGoals,
    wire::GeneratedGoals,
    ops::gen_goals
);
op_route!(
    op_gen_corpus,
    wire::GenCorpus,
    wire::GeneratedCorpus,
    ops::gen_corpus
);
op_route!(
    op_check_paraphrases,
    wire::CheckParaphrases,
    wire::ParaphraseCheck,
    ops::check_paraphrases
);
op_route!(op_eval, wire::Evaluate, EvalReport, ops::evaluate);
op_route!(op_sweep_data, wire::SweepData, Curve, ops::sweep_data);
op_route!(
    op_sweep_manuals,
    wire::SweepManuals,
    Curve,
    ops::sweep_manuals
);
op_route!(op_lodo, wire::LeaveOneDomainOut, LodoTable, ops::lodo);
op_route!(op_annotate, wire::Annotate, wire::Annotated, ops::annotate);

async fn not_found() -> ApiError {
    ApiError::new(ErrorKind::NotFound, "no such route")
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}", get(view))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/manual/search", get(search_manual))
        .route("/v1/sessions/{id}/instructions", post(select))
        .route("/v1/sessions/{id}/api", post(call_api))
        .route(
            "/v1/sessions/{id}/checklist",
            get(checklist).post(update_checklist),
        )
        .route("/v1/sessions/{id}/finalize", post(finalize))
        .route("/v1/sessions/{id}/reopen", post(reopen))
        .route("/v1/sessions/{id}/export", get(export))
        .route("/v1/sessions/{id}/events", get(events))
        .route("/v1/corpus", get(corpus))
        .route("/v1/goals", get(goals))
        .route("/v1/manuals", get(manuals))
        .route("/v1/ops/gen-db", post(op_gen_db))
        .route("/v1/ops/gen-goals", post(op_gen_goals))
        .route("/v1/ops/gen-corpus", post(op_gen_corpus))
        .route("/v1/ops/check-paraphrases", post(op_check_paraphrases))
        .route("/v1/ops/eval", post(op_eval))
        .route("/v1/ops/sweep-data", post(op_sweep_data))
        .route("/v1/ops/sweep-manuals", post(op_sweep_manuals))
        .route("/v1/ops/lodo", post(op_lodo))
        .route("/v1/ops/annotate", post(op_annotate))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Shared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
