//! HTTP and WebSocket API.
//!
//! Each message runs the whole pipeline on a blocking thread while holding
//! its session's lock, then publishes the resulting frames. Subscribers
//! replay the log first and then follow the live feed, skipping anything
//! they have already seen.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;

use fsa_core::scenario::{AgentRole, ScenarioDefinition, StudentEvent};
use fsa_core::store::{EntryKind, FileStore, LogEntry, SessionStatus, StoreError};
use fsa_core::supervisor::{metrics_by_decision, Session, Supervisor, SupervisorError};

/// Largest accepted message text, in bytes.
pub const MAX_TEXT_BYTES: usize = 8 * 1024;
const FRAME_BUFFER: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    AgentReply,
    Decision,
    Metrics,
    Report,
}

/// One item on a session stream. A metrics frame shares the sequence number
/// of the decision it follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFrame {
    pub kind: FrameKind,
    pub seq: u64,
    pub payload: Value,
}

impl StreamFrame {
    fn order(&self) -> (u64, FrameKind) {
        (self.seq, self.kind)
    }
}

/// A message as posted by a client.
#[derive(Debug, Clone, Deserialize)]
pub struct ApiEvent {
    pub target: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub action: Option<String>,
    /// Informational only; the server stamps events on arrival.
    #[serde(default)]
    pub client_ts: Option<String>,
}

struct LiveSession {
    session: Mutex<Session>,
    frames: broadcast::Sender<StreamFrame>,
}

pub struct AppState {
    supervisor: Supervisor,
    store: FileStore,
    scenarios: BTreeMap<String, Arc<ScenarioDefinition>>,
    live: Mutex<HashMap<String, Arc<LiveSession>>>,
}

impl AppState {
    pub fn new(
        supervisor: Supervisor,
        store: FileStore,
        scenarios: BTreeMap<String, Arc<ScenarioDefinition>>,
    ) -> Arc<Self> {
        Arc::new(Self { supervisor, store, scenarios, live: Mutex::new(HashMap::new()) })
    }

    pub fn store(&self) -> &FileStore {
        &self.store
    }

    /// The in-memory session, rebuilt from its log after a restart.
    fn live(&self, id: &str) -> Result<Arc<LiveSession>, ApiError> {
        if let Some(s) = self.live.lock().expect("live map lock").get(id) {
            return Ok(s.clone());
        }
        let record = self.store.session(id)?;
        let scenario = self
            .scenarios
            .get(&record.scenario_id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, format!("scenario `{}` is not loaded", record.scenario_id)))?;
        let entries = self.store.read_log(id)?.entries;
        let (session, _) = self.supervisor.restore(id, scenario, &entries)?;
        let (frames, _) = broadcast::channel(FRAME_BUFFER);
        let live = Arc::new(LiveSession { session: Mutex::new(session), frames });
        Ok(self.live.lock().expect("live map lock").entry(id.to_string()).or_insert(live).clone())
    }

    fn frames_from_log(&self, entries: &[LogEntry]) -> Result<Vec<StreamFrame>, ApiError> {
        let metrics: HashMap<u64, Value> = metrics_by_decision(entries, self.supervisor.scorer().config().off_topic_below)?
            .into_iter()
            .map(|(seq, m)| (seq, serde_json::to_value(m).expect("metrics serialize")))
            .collect();
        let mut frames = Vec::new();
        for e in entries {
            let kind = match e.kind {
                EntryKind::AgentReply => FrameKind::AgentReply,
                EntryKind::Decision => FrameKind::Decision,
                EntryKind::Report => FrameKind::Report,
                EntryKind::StudentEvent | EntryKind::Scores => continue,
            };
            frames.push(StreamFrame { kind, seq: e.seq, payload: e.payload.clone() });
            if let Some(m) = metrics.get(&e.seq).filter(|_| kind == FrameKind::Decision) {
                frames.push(StreamFrame { kind: FrameKind::Metrics, seq: e.seq, payload: m.clone() });
            }
        }
        Ok(frames)
    }
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
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownSession(_) | StoreError::InvalidId(_) => StatusCode::NOT_FOUND,
            StoreError::Closed(_) | StoreError::DuplicateSession(_) | StoreError::MissingReport(_) => StatusCode::CONFLICT,
            StoreError::Corrupt { .. } | StoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<SupervisorError> for ApiError {
    fn from(e: SupervisorError) -> Self {
        match e {
            SupervisorError::Store(s) => s.into(),
            SupervisorError::Closed(_) | SupervisorError::EmptySession => ApiError::new(StatusCode::CONFLICT, e.to_string()),
            SupervisorError::Clock(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            SupervisorError::Fuzzy(_) | SupervisorError::CorruptLog(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/close", post(close_session))
        .route("/sessions/{id}/report", get(get_report))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn list_scenarios(State(state): State<Arc<AppState>>) -> Json<Value> {
    let list: Vec<Value> = state
        .scenarios
        .values()
        .map(|s| json!({ "id": s.id, "title": s.title, "chief_complaint": s.chief_complaint }))
        .collect();
    Json(Value::Array(list))
}

#[derive(Deserialize)]
struct CreateSession {
    scenario_id: String,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(body): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Some(scenario) = state.scenarios.get(&body.scenario_id).cloned() else {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown scenario `{}`", body.scenario_id)));
    };
    blocking(move || {
        let record = state.store.create_session(&scenario.id, Utc::now())?;
        let (frames, _) = broadcast::channel(FRAME_BUFFER);
        let live = LiveSession { session: Mutex::new(Session::new(&record.session_id, scenario)), frames };
        state.live.lock().expect("live map lock").insert(record.session_id.clone(), Arc::new(live));
        Ok((StatusCode::CREATED, Json(serde_json::to_value(&record).expect("record serializes"))))
    })
    .await
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ApiEvent>,
) -> ApiResult<Json<Value>> {
    let target: AgentRole = body.target.parse().map_err(|e: fsa_core::scenario::UnknownRole| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
    })?;
    if body.text.len() > MAX_TEXT_BYTES {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("text is {} bytes; the limit is {MAX_TEXT_BYTES}", body.text.len()),
        ));
    }
    blocking(move || {
        let live = state.live(&id)?;
        let mut session = live.session.lock().expect("session lock");
        let ts = ingest_time(session.metrics().last_ts);
        let event = StudentEvent { target, text: body.text, action: body.action, ts };
        let outcome = state.supervisor.handle_event(&mut session, &state.store, &event)?;
        let step = &outcome.step;
        let [_, reply_seq, _, decision_seq] = outcome.seqs;
        let reply = serde_json::to_value(&step.reply).expect("reply serializes");
        let decision = serde_json::to_value(&step.decision).expect("decision serializes");
        let metrics = serde_json::to_value(&outcome.metrics).expect("metrics serialize");
        for frame in [
            StreamFrame { kind: FrameKind::AgentReply, seq: reply_seq, payload: reply.clone() },
            StreamFrame { kind: FrameKind::Decision, seq: decision_seq, payload: decision.clone() },
            StreamFrame { kind: FrameKind::Metrics, seq: decision_seq, payload: metrics.clone() },
        ] {
            let _ = live.frames.send(frame);
        }
        Ok(Json(json!({
            "seq": outcome.seqs[0],
            "reply": reply,
            "scores": step.scores,
            "decision": decision,
            "metrics": metrics,
        })))
    })
    .await
}

/// Arrival time, nudged forward if the wall clock stepped backwards.
fn ingest_time(last: Option<DateTime<Utc>>) -> DateTime<Utc> {
    let now = Utc::now();
    last.map_or(now, |l| now.max(l))
}

async fn close_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let live = state.live(&id)?;
        let mut session = live.session.lock().expect("session lock");
        let ts = ingest_time(session.metrics().last_ts);
        let report = state.supervisor.finalize_session(&mut session, &state.store, ts)?;
        let payload = serde_json::to_value(&report).expect("report serializes");
        let seq = state.store.read_log(&id)?.entries.last().map_or(0, |e| e.seq);
        let _ = live.frames.send(StreamFrame { kind: FrameKind::Report, seq, payload: payload.clone() });
        Ok(Json(payload))
    })
    .await
}

async fn get_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let record = state.store.session(&id)?;
        if record.status != SessionStatus::Closed {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("session `{id}` is still open")));
        }
        let log = state.store.read_log(&id)?;
        let report = log
            .entries
            .iter()
            .rev()
            .find(|e| e.kind == EntryKind::Report)
            .ok_or_else(|| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "closed session has no report"))?;
        Ok(Json(report.payload.clone()))
    })
    .await
}

async fn get_log(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let record = state.store.session(&id)?;
        let log = state.store.read_log(&id)?;
        Ok(Json(json!({ "session": record, "entries": log.entries, "truncated": log.truncated() })))
    })
    .await
}

#[derive(Deserialize)]
struct StreamQuery {
    #[serde(default)]
    from: u64,
}

async fn stream(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let lookup = state.clone();
    let lookup_id = id.clone();
    let live = blocking(move || lookup.live(&lookup_id)).await?;
    Ok(ws.on_upgrade(move |socket| follow(socket, state, live, id, query.from)))
}

async fn follow(mut socket: WebSocket, state: Arc<AppState>, live: Arc<LiveSession>, id: String, from: u64) {
    let mut rx = live.frames.subscribe();
    let mut last: Option<(u64, FrameKind)> = None;
    if !backfill(&mut socket, &state, &id, from, &mut last).await {
        return;
    }
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(frame) => {
                    if frame.seq >= from && last.is_none_or(|l| frame.order() > l) {
                        last = Some(frame.order());
                        if !send(&mut socket, &frame).await {
                            return;
                        }
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    if !backfill(&mut socket, &state, &id, from, &mut last).await {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// Sends logged frames newer than `last`. Returns false once the socket is
/// gone.
async fn backfill(
    socket: &mut WebSocket,
    state: &Arc<AppState>,
    id: &str,
    from: u64,
    last: &mut Option<(u64, FrameKind)>,
) -> bool {
    let (st, sid) = (state.clone(), id.to_string());
    let frames = match blocking(move || {
        let entries = st.store.read_log(&sid)?.entries;
        st.frames_from_log(&entries)
    })
    .await
    {
        Ok(frames) => frames,
        Err(e) => {
            let _ = socket.send(Message::Text(json!({ "error": e.message }).to_string().into())).await;
            return false;
        }
    };
    for frame in frames {
        if frame.seq >= from && last.is_none_or(|l| frame.order() > l) {
            *last = Some(frame.order());
            if !send(socket, &frame).await {
                return false;
            }
        }
    }
    true
}

async fn send(socket: &mut WebSocket, frame: &StreamFrame) -> bool {
    let text = serde_json::to_string(frame).expect("frame serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}
