//! HTTP and WebSocket front end for training sessions.
//!
//! Each session lives behind its own lock. Every change to a session is
//! broadcast to all sockets attached to it, so a second tab sees the same
//! board. Live sessions are clocked in seconds since creation.

pub mod protocol;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc};
use tokio::time::Instant;
use tower_http::services::ServeDir;

use tamer_core::mdp::{parse_layout, GridWorld};
use tamer_core::session::{DemoOutcome, Mode, Phase, Session, SessionConfig};

use protocol::{ClientMessage, ControlCommand, CreateSession, Created, ServerMessage};

const CHANNEL_CAPACITY: usize = 1024;

#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Registry>,
}

#[derive(Default)]
struct Registry {
    sessions: Mutex<HashMap<u64, Arc<Slot>>>,
    next_id: AtomicU64,
}

struct Slot {
    live: tokio::sync::Mutex<Live>,
    tx: broadcast::Sender<String>,
}

struct Live {
    session: Session,
    origin: Instant,
    running: bool,
    /// Bumped on reset so a ticker from the old session stops.
    generation: u64,
    seq: u64,
}

impl Live {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn bump(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn snapshot(&self) -> ServerMessage {
        ServerMessage::state(self.seq, &self.session, self.running)
    }

    fn state(&mut self) -> ServerMessage {
        let seq = self.bump();
        ServerMessage::state(seq, &self.session, self.running)
    }

    fn metrics(&mut self) -> ServerMessage {
        let seq = self.bump();
        ServerMessage::metrics(seq, &self.session)
    }

    /// Advances the session by one step. `None` when a live step is still too short.
    #[allow(clippy::result_large_err)]
    fn tick(&mut self) -> Result<Option<Vec<ServerMessage>>, ServerMessage> {
        let outcome = match self.session.config().mode {
            Mode::Simulated => self.session.run_step(),
            Mode::Live => {
                let now = self.now();
                match self.session.run_step_at(now) {
                    Err(tamer_core::Error::Phase { code: "step_too_soon", .. }) => return Ok(None),
                    other => other,
                }
            }
        }
        .map_err(to_message)?;
        if outcome.phase != Phase::Training {
            self.running = false;
        }
        let mut out = vec![self.state()];
        if outcome.reached_goal {
            let seq = self.bump();
            out.push(ServerMessage::EpisodeEnd { seq, episode: outcome.episode, steps: outcome.episode_step });
        }
        if outcome.reached_goal || outcome.feedback.is_some() || outcome.phase != Phase::Training {
            out.push(self.metrics());
        }
        Ok(Some(out))
    }
}

fn to_message(e: tamer_core::Error) -> ServerMessage {
    match e {
        tamer_core::Error::Phase { code, message } => ServerMessage::error(code, message),
        other => ServerMessage::error("invalid", other.to_string()),
    }
}

impl Slot {
    fn publish(&self, messages: Vec<ServerMessage>) {
        for m in messages {
            // no receivers is fine
            let _ = self.tx.send(m.to_json());
        }
    }
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a session and returns its id.
    pub fn create(&self, grid: GridWorld, config: SessionConfig) -> tamer_core::Result<u64> {
        let session = Session::new(grid, config)?;
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        let slot = Slot {
            live: tokio::sync::Mutex::new(Live { session, origin: Instant::now(), running: false, generation: 0, seq: 0 }),
            tx,
        };
        let id = self.inner.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        self.inner.sessions.lock().expect("registry lock").insert(id, Arc::new(slot));
        Ok(id)
    }

    fn get(&self, id: u64) -> Option<Arc<Slot>> {
        self.inner.sessions.lock().expect("registry lock").get(&id).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.sessions.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Applies one client message and broadcasts the resulting changes.
/// Errors go back to the sender only.
#[allow(clippy::result_large_err)]
async fn apply(slot: &Arc<Slot>, msg: ClientMessage) -> Result<(), ServerMessage> {
    let mut live = slot.live.lock().await;
    let mut out = Vec::new();
    match msg {
        ClientMessage::DemoKey { action } => {
            let outcome = live.session.record_demo_step(action).map_err(to_message)?;
            if outcome != DemoOutcome::Blocked {
                out.push(live.state());
            }
        }
        ClientMessage::Feedback { value } => {
            let now = live.now();
            live.session.ingest_feedback(value, now).map_err(to_message)?;
            out.push(live.metrics());
        }
        ClientMessage::Control { cmd: ControlCommand::SkipDemo } => {
            live.session.skip_demo().map_err(to_message)?;
            out.push(live.state());
        }
        ClientMessage::Control { cmd: ControlCommand::Start } => {
            if live.session.phase() != Phase::Training {
                return Err(ServerMessage::error(
                    "not_training",
                    format!("session is {}", live.session.phase().name()),
                ));
            }
            if !live.running {
                live.running = true;
                let generation = live.generation;
                let period = Duration::from_secs_f64(live.session.config().step_duration);
                tokio::spawn(ticker(slot.clone(), generation, period));
                out.push(live.state());
            }
        }
        ClientMessage::Control { cmd: ControlCommand::Reset } => {
            let fresh = Session::new(live.session.grid().clone(), live.session.config().clone()).map_err(to_message)?;
            live.session = fresh;
            live.origin = Instant::now();
            live.running = false;
            live.generation += 1;
            out.push(live.state());
        }
    }
    slot.publish(out);
    Ok(())
}

async fn ticker(slot: Arc<Slot>, generation: u64, period: Duration) {
    loop {
        tokio::time::sleep(period).await;
        let mut live = slot.live.lock().await;
        if live.generation != generation || !live.running {
            return;
        }
        match live.tick() {
            Ok(Some(messages)) => slot.publish(messages),
            Ok(None) => {}
            Err(e) => {
                live.running = false;
                let state = live.state();
                slot.publish(vec![e, state]);
                return;
            }
        }
        if !live.running {
            return;
        }
    }
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

fn not_found(id: u64) -> Response {
    error_response(StatusCode::NOT_FOUND, format!("no session {id}"))
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Response {
    let request: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error_response(StatusCode::BAD_REQUEST, e.to_string()),
        }
    };
    let grid = match request.layout.as_deref().map(parse_layout).transpose() {
        Ok(g) => g.unwrap_or_else(GridWorld::canonical),
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let config = request.config.unwrap_or_else(|| SessionConfig { mode: Mode::Live, ..Default::default() });
    match app.create(grid, config) {
        Ok(id) => {
            let slot = app.get(id).expect("just inserted");
            let phase = slot.live.lock().await.session.phase().name().to_string();
            (StatusCode::CREATED, Json(Created { id, phase })).into_response()
        }
        Err(e) => error_response(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

async fn session_state(State(app): State<AppState>, UrlPath(id): UrlPath<u64>) -> Response {
    match app.get(id) {
        Some(slot) => Json(slot.live.lock().await.snapshot()).into_response(),
        None => not_found(id),
    }
}

async fn heatmap(State(app): State<AppState>, UrlPath(id): UrlPath<u64>) -> Response {
    let Some(slot) = app.get(id) else { return not_found(id) };
    let live = slot.live.lock().await;
    match live.session.heatmap("current") {
        Ok(h) => Json(h).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn transcript(State(app): State<AppState>, UrlPath(id): UrlPath<u64>) -> Response {
    let Some(slot) = app.get(id) else { return not_found(id) };
    let live = slot.live.lock().await;
    match live.session.transcript() {
        Ok(t) => Json(t).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn websocket(State(app): State<AppState>, UrlPath(id): UrlPath<u64>, ws: WebSocketUpgrade) -> Response {
    match app.get(id) {
        Some(slot) => ws.on_upgrade(move |socket| client(socket, slot)),
        None => not_found(id),
    }
}

async fn client(socket: WebSocket, slot: Arc<Slot>) {
    let (mut sink, mut stream) = socket.split();
    // subscribe under the lock so the snapshot and the stream line up
    let (first, mut updates) = {
        let live = slot.live.lock().await;
        (live.snapshot().to_json(), slot.tx.subscribe())
    };
    let (direct, mut replies) = mpsc::unbounded_channel::<String>();

    let writer = tokio::spawn(async move {
        if sink.send(Message::Text(first.into())).await.is_err() {
            return;
        }
        loop {
            let text = tokio::select! {
                m = updates.recv() => match m {
                    Ok(text) => text,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return,
                },
                r = replies.recv() => match r {
                    Some(text) => text,
                    None => return,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Ok(msg) => apply(&slot, msg).await.err(),
            Err(e) => Some(ServerMessage::error("bad_message", e.to_string())),
        };
        if let Some(reply) = reply {
            if direct.send(reply.to_json()).is_err() {
                break;
            }
        }
    }
    writer.abort();
}

/// The API routes, plus static files from `ui_dir` for every other path.
pub fn router(app: AppState, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(session_state))
        .route("/api/session/{id}/heatmap", get(heatmap))
        .route("/api/session/{id}/transcript", get(transcript))
        .route("/api/session/{id}/ws", get(websocket))
        .with_state(app);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    pub ui_dir: Option<PathBuf>,
}

pub async fn serve(options: ServeOptions) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(options.addr).await?;
    axum::serve(listener, router(AppState::new(), options.ui_dir.as_deref())).await
}
