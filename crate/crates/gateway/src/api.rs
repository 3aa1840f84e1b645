//! JSON API over HTTP.
//!
//! Every route except `/healthz` needs `Authorization: Bearer <token>` with a
//! token of the addressed project. Reads are open to every member; writes
//! only to the user they act for.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, PoisonError};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use gapquest_core::analytics::{self, Format};
use gapquest_core::challenge::{BuildStatus, Challenge, ChallengeState};
use gapquest_core::ingest::IngestError;
use gapquest_core::orchestrator::{
    EngineError, ProjectHandle, ProjectState, RunInput, RunReport, Store, StoreError,
};
use gapquest_core::progression::AchievementScope;
use gapquest_core::quest::{Quest, QuestState};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::tokens::TokenFile;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(detail) = self.detail {
            body["detail"] = detail;
        }
        (self.status, Json(body)).into_response()
    }
}

fn ingest_detail(err: &IngestError) -> Value {
    match err {
        IngestError::Parse { position, message } => {
            json!({ "kind": "parse", "row": position.row, "col": position.col, "message": message })
        }
        IngestError::UnexpectedRoot { expected, found } => {
            json!({ "kind": "unexpected_root", "expected": expected, "found": found })
        }
        IngestError::Schema {
            element,
            attribute,
            problem,
        } => json!({ "kind": "schema", "element": element, "attribute": attribute, "problem": problem }),
        IngestError::DuplicateMutant(key) => json!({ "kind": "duplicate_mutant", "mutant": key }),
        IngestError::Model(e) => json!({ "kind": "model", "problems": e.problems }),
    }
}

impl From<EngineError> for ApiError {
    fn from(err: EngineError) -> Self {
        let message = err.to_string();
        match err {
            EngineError::NotRegistered(_) => Self::new(StatusCode::NOT_FOUND, "unknown_user", message),
            EngineError::UnknownChallenge(_) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_challenge", message)
            }
            EngineError::DuplicateUser(_) => Self::new(StatusCode::CONFLICT, "conflict", message),
            EngineError::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", message),
            EngineError::Validation(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message)
            }
            EngineError::Ingest { ref source, .. } => ApiError {
                detail: Some(ingest_detail(source)),
                ..Self::bad_request(message)
            },
            EngineError::Accounting(_) | EngineError::Store(_) => Self::internal(message),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "unknown_project", err.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}

/// Shared server state: the store and the projects opened so far.
#[derive(Debug)]
pub struct AppState {
    store: Store,
    projects: Mutex<HashMap<String, Arc<ProjectHandle>>>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState {
            store,
            projects: Mutex::new(HashMap::new()),
        }
    }

    fn project(&self, id: &str) -> Result<Arc<ProjectHandle>, ApiError> {
        let mut projects = self.projects.lock().unwrap_or_else(PoisonError::into_inner);
        if let Some(handle) = projects.get(id) {
            return Ok(handle.clone());
        }
        let handle = Arc::new(ProjectHandle::open(self.store.clone(), id)?);
        projects.insert(id.to_owned(), handle.clone());
        Ok(handle)
    }

    /// Resolves the project and the user behind the bearer token.
    fn authorize(&self, headers: &HeaderMap, project: &str) -> Result<(Arc<ProjectHandle>, String), ApiError> {
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(ApiError::unauthorized)?;
        let handle = self.project(project)?;
        let tokens = TokenFile::load(&self.store.project_dir(project))
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let user = tokens.authenticate(token).ok_or_else(ApiError::unauthorized)?;
        Ok((handle, user.to_owned()))
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    let user = "/api/projects/{p}/users/{u}";
    Router::new()
        .route("/healthz", get(health))
        .route(user, get(profile))
        .route(&format!("{user}/challenges"), get(challenges))
        .route(&format!("{user}/challenges/{{id}}/reject"), post(reject))
        .route(&format!("{user}/quests"), get(quests))
        .route(&format!("{user}/achievements"), get(achievements))
        .route(&format!("{user}/events"), get(events))
        .route("/api/projects/{p}/leaderboard", get(leaderboard))
        .route("/api/projects/{p}/leaderboard/teams", get(team_leaderboard))
        .route("/api/projects/{p}/runs", post(ingest))
        .route("/api/projects/{p}/stats", get(stats))
        .route("/api/projects/{p}/stats/summary", get(stats_summary))
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

fn user_record<'a>(
    project: &'a ProjectState,
    user: &str,
) -> Result<&'a gapquest_core::orchestrator::UserRecord, ApiError> {
    Ok(project.user(user)?)
}

#[derive(Serialize)]
struct Profile<'a> {
    user_id: &'a str,
    display_name: &'a str,
    avatar_index: u8,
    team: Option<&'a str>,
    score: u64,
    runs: usize,
    last_event_seq: u64,
}

async fn profile(
    State(app): State<Shared>,
    Path((p, u)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (handle, _) = app.authorize(&headers, &p)?;
    let snapshot = handle.snapshot();
    let record = user_record(&snapshot, &u)?;
    let s = &record.state;
    Ok(Json(Profile {
        user_id: &s.user_id,
        display_name: &s.display_name,
        avatar_index: s.avatar_index,
        team: s.team.as_deref(),
        score: s.score,
        runs: record.runs.len(),
        last_event_seq: s.event_seq,
    })
    .into_response())
}

#[derive(Deserialize)]
struct StateQuery {
    state: Option<String>,
}

fn challenge_filter(state: Option<&str>) -> Result<Option<ChallengeState>, ApiError> {
    Ok(match state {
        None | Some("all") => None,
        Some("current") => Some(ChallengeState::Current),
        Some("completed" | "solved") => Some(ChallengeState::Solved),
        Some("rejected") => Some(ChallengeState::Rejected),
        Some("expired") => Some(ChallengeState::Expired),
        Some(other) => return Err(ApiError::bad_request(format!("unknown challenge state {other:?}"))),
    })
}

async fn challenges(
    State(app): State<Shared>,
    Path((p, u)): Path<(String, String)>,
    Query(q): Query<StateQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (handle, _) = app.authorize(&headers, &p)?;
    let filter = challenge_filter(q.state.as_deref())?;
    let snapshot = handle.snapshot();
    let list: Vec<&Challenge> = user_record(&snapshot, &u)?
        .state
        .challenges
        .iter()
        .filter(|c| filter.is_none_or(|s| c.state == s))
        .collect();
    Ok(Json(list).into_response())
}

#[derive(Serialize)]
struct QuestView<'a> {
    #[serde(flatten)]
    quest: &'a Quest,
    percent: u32,
    description: String,
}

async fn quests(
    State(app): State<Shared>,
    Path((p, u)): Path<(String, String)>,
    Query(q): Query<StateQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (handle, _) = app.authorize(&headers, &p)?;
    let filter = match q.state.as_deref() {
        None | Some("all") => None,
        Some("current") => Some(QuestState::Current),
        Some("completed") => Some(QuestState::Completed),
        Some("failed") => Some(QuestState::Failed),
        Some(other) => return Err(ApiError::bad_request(format!("unknown quest state {other:?}"))),
    };
    let snapshot = handle.snapshot();
    let list: Vec<QuestView> = user_record(&snapshot, &u)?
        .state
        .quests
        .iter()
        .filter(|quest| filter.is_none_or(|s| quest.state == s))
        .map(|quest| QuestView {
            quest,
            percent: quest.percent(),
            description: quest.description(),
        })
        .collect();
    Ok(Json(list).into_response())
}

#[derive(Serialize)]
struct AchievementView<'a> {
    key: &'a str,
    title: &'a str,
    description: &'a str,
    secret: bool,
    scope: AchievementScope,
    unlocked: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    unlocked_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    run_seq: Option<u64>,
}

async fn achievements(
    State(app): State<Shared>,
    Path((p, u)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (handle, _) = app.authorize(&headers, &p)?;
    let snapshot = handle.snapshot();
    let user = &user_record(&snapshot, &u)?.state;
    let list: Vec<AchievementView> = snapshot
        .config
        .achievements
        .iter()
        .filter_map(|def| {
            let unlock = user.achievements.get(&def.key);
            if def.secret && unlock.is_none() {
                return None;
            }
            Some(AchievementView {
                key: &def.key,
                title: &def.title,
                description: &def.description,
                secret: def.secret,
                scope: def.scope,
                unlocked: unlock.is_some(),
                unlocked_at: unlock.map(|x| x.unlocked_at),
                run_seq: unlock.map(|x| x.run_seq),
            })
        })
        .collect();
    Ok(Json(list).into_response())
}

#[derive(Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

async fn events(
    State(app): State<Shared>,
    Path((p, u)): Path<(String, String)>,
    Query(q): Query<SinceQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (handle, _) = app.authorize(&headers, &p)?;
    let snapshot = handle.snapshot();
    let events = snapshot.events_since(&u, q.since.unwrap_or(0))?;
    let last_seq = snapshot.user(&u)?.state.event_seq;
    Ok(Json(json!({ "events": events, "last_seq": last_seq })).into_response())
}

async fn leaderboard(
    State(app): State<Shared>,
    Path(p): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (handle, _) = app.authorize(&headers, &p)?;
    Ok(Json(handle.snapshot().leaderboard()).into_response())
}

async fn team_leaderboard(
    State(app): State<Shared>,
    Path(p): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (handle, _) = app.authorize(&headers, &p)?;
    Ok(Json(handle.snapshot().team_leaderboard()).into_response())
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

/// Body of `POST /api/projects/{p}/runs`. The artifacts are the XML
/// documents as strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRequest {
    pub commit: String,
    pub build_status: BuildStatus,
    pub coverage: String,
    pub mutations: String,
    pub tests: Vec<String>,
    /// Acts for this user; defaults to the token owner.
    #[serde(default)]
    pub user_id: Option<String>,
    /// Refuse the run unless it gets this sequence number.
    #[serde(default)]
    pub run_seq: Option<u64>,
    /// Defaults to the time of receipt.
    #[serde(default)]
    pub received_at: Option<DateTime<Utc>>,
}

async fn write<T: Send + 'static>(
    handle: Arc<ProjectHandle>,
    op: impl FnOnce(&mut ProjectState) -> Result<T, EngineError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(move || handle.update(op))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

fn require_self(caller: &str, user: &str) -> Result<(), ApiError> {
    if caller == user {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            format!("token of {caller} cannot act for {user}"),
        ))
    }
}

async fn ingest(
    State(app): State<Shared>,
    Path(p): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let (handle, caller) = app.authorize(&headers, &p)?;
    let req: RunRequest = parse_body(&body)?;
    let user = req.user_id.clone().unwrap_or_else(|| caller.clone());
    require_self(&caller, &user)?;
    let input = RunInput {
        commit: req.commit,
        build_status: req.build_status,
        received_at: req.received_at.unwrap_or_else(Utc::now),
        coverage: req.coverage.into_bytes(),
        mutations: req.mutations.into_bytes(),
        tests: req.tests.into_iter().map(String::into_bytes).collect(),
        expected_run_seq: req.run_seq,
    };
    let report: RunReport = write(handle, move |state| state.ingest_run(&user, input)).await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
struct RejectRequest {
    reason: String,
}

async fn reject(
    State(app): State<Shared>,
    Path((p, u, id)): Path<(String, String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let (handle, caller) = app.authorize(&headers, &p)?;
    require_self(&caller, &u)?;
    let req: RejectRequest = parse_body(&body)?;
    let (report, replacement) = write(handle, move |state| {
        let report = state.reject_challenge(&u, &id, &req.reason)?;
        let replacement = report
            .events
            .iter()
            .find_map(|e| e.payload.challenge_id.as_deref())
            .map(|cid| state.challenge(&u, cid).cloned())
            .transpose()?;
        Ok((report, replacement))
    })
    .await?;
    Ok(Json(json!({ "report": report, "replacement": replacement })).into_response())
}

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

async fn stats(
    State(app): State<Shared>,
    Path(p): Path<String>,
    Query(q): Query<FormatQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    app.authorize(&headers, &p)?;
    let format: Format = q
        .format
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(|e: analytics::UnknownFormat| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", e.to_string())
        })?;
    let rows = analytics::load_stats(&app.store, &p)?;
    let bytes = analytics::export(&rows, format);
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes).into_response())
}

async fn stats_summary(
    State(app): State<Shared>,
    Path(p): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    app.authorize(&headers, &p)?;
    let rows = analytics::load_stats(&app.store, &p)?;
    let summary = analytics::aggregate(&rows)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "empty_project", e.to_string()))?;
    Ok(Json(summary).into_response())
}
