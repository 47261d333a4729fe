//! Websocket session server and static bundle hosting.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use hipt_core::env::Layout;
use log::{error, info, warn};
use tokio::sync::mpsc;
use tokio::time::{interval, sleep_until, Instant, MissedTickBehavior};
use tower_http::services::{ServeDir, ServeFile};

use crate::agents::AgentRef;
use crate::config::ServeSettings;
use crate::protocol::{parse_client, ClientMessage, ServerMessage};
use crate::session::{AgentSlot, Phase, Session, SessionOptions, SessionStore};

const PLACEHOLDER_PAGE: &str = include_str!("../static/index.html");

enum Inbound {
    Attach(mpsc::UnboundedSender<ServerMessage>),
    Detach,
    Client(ClientMessage),
}

pub struct ServerState {
    pub settings: ServeSettings,
    pub layout: Layout,
    pub agents: Vec<(String, AgentRef)>,
    sessions: Mutex<HashMap<String, mpsc::UnboundedSender<Inbound>>>,
}

impl ServerState {
    pub fn new(settings: ServeSettings, layout: Layout) -> anyhow::Result<Arc<Self>> {
        let agents = settings
            .agents
            .iter()
            .map(|s| s.parse::<AgentRef>().map(|r| (s.clone(), r)).map_err(anyhow::Error::msg))
            .collect::<anyhow::Result<Vec<_>>>()?;
        // Fail at startup rather than on the first join.
        for (id, r) in &agents {
            r.load().map_err(|e| anyhow::anyhow!("agent {id}: {e}"))?;
        }
        Ok(Arc::new(Self { settings, layout, agents, sessions: Mutex::new(HashMap::new()) }))
    }

    fn new_session(&self, id: &str) -> anyhow::Result<Session> {
        let agents = self
            .agents
            .iter()
            .map(|(id, r)| Ok(AgentSlot { id: id.clone(), policy: r.load()? }))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let options = SessionOptions {
            human_seat: self.settings.human_seat,
            horizon: self.settings.horizon,
            rounds: self.settings.rounds,
            tutorial_games: self.settings.tutorial_games,
            seed: rand::random(),
        };
        let store = SessionStore::new(&self.settings.data_dir, id)?;
        Ok(Session::new(id, self.layout.clone(), agents, options, Some(store))?)
    }
}

pub fn router(state: Arc<ServerState>) -> Router {
    let app = Router::new().route("/ws", get(ws_handler)).route("/health", get(|| async { "ok" }));
    let app = match &state.settings.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(dir.join("index.html")))),
        None => app.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    };
    app.with_state(state)
}

pub async fn serve(state: Arc<ServerState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    info!("serving on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<Arc<ServerState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_loop(socket, state))
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn client_loop(mut socket: WebSocket, state: Arc<ServerState>) {
    let session_id = loop {
        match socket.recv().await {
            Some(Ok(Message::Text(text))) => match parse_client(&text) {
                Ok(ClientMessage::Join { session }) if valid_session_id(&session) => break session,
                _ => {
                    let msg = ServerMessage::Error { message: "expected join{session} first".into() };
                    let _ = socket.send(Message::Text(msg.to_json().into())).await;
                }
            },
            Some(Ok(_)) => {}
            _ => return,
        }
    };

    let inbox = {
        let mut sessions = state.sessions.lock().expect("session registry");
        match sessions.get(&session_id).filter(|tx| !tx.is_closed()) {
            Some(tx) => Ok(tx.clone()),
            None => match state.new_session(&session_id) {
                Ok(session) => {
                    let (tx, rx) = mpsc::unbounded_channel();
                    sessions.insert(session_id.clone(), tx.clone());
                    tokio::spawn(run_session(session, rx, state.clone()));
                    Ok(tx)
                }
                Err(e) => Err(e.to_string()),
            },
        }
    };
    let inbox = match inbox {
        Ok(tx) => tx,
        Err(e) => {
            error!("session {session_id}: {e}");
            let msg = ServerMessage::Error { message: format!("could not start session: {e}") };
            let _ = socket.send(Message::Text(msg.to_json().into())).await;
            return;
        }
    };

    let (out_tx, mut out_rx) = mpsc::unbounded_channel();
    if inbox.send(Inbound::Attach(out_tx)).is_err() {
        return;
    }
    loop {
        tokio::select! {
            msg = out_rx.recv() => match msg {
                Some(m) => {
                    if socket.send(Message::Text(m.to_json().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match parse_client(&text) {
                    Ok(m) => {
                        let _ = inbox.send(Inbound::Client(m));
                    }
                    Err(e) => {
                        let msg = ServerMessage::Error { message: e };
                        if socket.send(Message::Text(msg.to_json().into())).await.is_err() {
                            break;
                        }
                    }
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = inbox.send(Inbound::Detach);
}

/// The session's own tick loop. Runs until the session is done or stays
/// detached past the park timeout.
async fn run_session(mut session: Session, mut inbox: mpsc::UnboundedReceiver<Inbound>, state: Arc<ServerState>) {
    let settings = &state.settings;
    let mut ticker = interval(Duration::from_millis(settings.tick_ms));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let far = || Instant::now() + Duration::from_secs(86_400 * 365);
    let mut client: Option<mpsc::UnboundedSender<ServerMessage>> = None;
    let mut next_episode_at = far();
    let mut park_deadline = Instant::now() + Duration::from_secs(settings.park_timeout_s);

    let send = |client: &Option<mpsc::UnboundedSender<ServerMessage>>, msgs: Vec<ServerMessage>| {
        if let Some(c) = client {
            for m in msgs {
                let _ = c.send(m);
            }
        }
    };

    loop {
        let playing = session.phase() == Phase::Playing && client.is_some();
        tokio::select! {
            msg = inbox.recv() => match msg {
                Some(Inbound::Attach(tx)) => {
                    let _ = tx.send(session.hello(settings.tick_ms));
                    client = Some(tx);
                    if session.phase() == Phase::Lobby {
                        match session.start() {
                            Ok(m) => send(&client, m),
                            Err(e) => warn!("session {}: {e}", session.id),
                        }
                    } else {
                        send(&client, vec![session.state_message()]);
                    }
                    ticker.reset();
                }
                Some(Inbound::Detach) => {
                    info!("session {} parked", session.id);
                    client = None;
                    park_deadline = Instant::now() + Duration::from_secs(settings.park_timeout_s);
                }
                Some(Inbound::Client(ClientMessage::Input { action })) => {
                    session.input(action);
                }
                Some(Inbound::Client(ClientMessage::Preference { choice })) => match session.preference(choice) {
                    Ok((record, m)) => {
                        info!("session {} round {} preference {}", session.id, record.round, record.choice);
                        send(&client, m);
                        if session.phase() == Phase::BetweenEpisodes {
                            next_episode_at = Instant::now() + Duration::from_millis(settings.between_episodes_ms);
                        }
                    }
                    Err(e) => send(&client, vec![ServerMessage::Error { message: e.to_string() }]),
                },
                Some(Inbound::Client(ClientMessage::Join { .. })) => {}
                None => break,
            },
            _ = ticker.tick(), if playing => match session.tick() {
                Ok(m) => {
                    send(&client, m);
                    if session.phase() == Phase::BetweenEpisodes {
                        next_episode_at = Instant::now() + Duration::from_millis(settings.between_episodes_ms);
                    }
                }
                Err(e) => {
                    error!("session {} aborted: {e}", session.id);
                    send(&client, vec![ServerMessage::Error { message: format!("session aborted: {e}") }]);
                    break;
                }
            },
            _ = sleep_until(next_episode_at), if session.phase() == Phase::BetweenEpisodes && client.is_some() => {
                next_episode_at = far();
                match session.next_episode() {
                    Ok(m) => send(&client, m),
                    Err(e) => warn!("session {}: {e}", session.id),
                }
                ticker.reset();
            },
            _ = sleep_until(park_deadline), if client.is_none() => {
                info!("session {} expired while parked", session.id);
                break;
            },
        }
        if session.phase() == Phase::Done {
            // Preferences and transcripts are already synced by the session.
            break;
        }
    }
    state.sessions.lock().expect("session registry").remove(&session.id);
}
