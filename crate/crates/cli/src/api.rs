//! Local JSON API for simulation front ends.
//!
//! | route                          | answer                                   |
//! |--------------------------------|------------------------------------------|
//! | `POST /sessions`               | 201, new session at the initial state    |
//! | `GET /sessions/{id}/state`     | configuration and enabled actions        |
//! | `POST /sessions/{id}/step`     | body `{"action_id": n}`                  |
//! | `POST /sessions/{id}/undo`     | one step back                            |
//! | `GET /model`                   | servers, agents, values, actions         |
//! | `GET /verify`                  | deadlock report with the witness trace   |
//! | `GET /graph?cap=N`             | reachable graph, 413 above the cap       |
//!
//! Unknown sessions answer 404, actions that are not enabled 409 with the
//! current enabled set, and unreadable bodies 422.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rybu_core::imds::ActionId;
use rybu_core::lts::{build_lts, check, ExplorationLimits};
use serde::Deserialize;

use crate::input::Loaded;
use crate::json::{ActionView, ErrorView, GraphView, ModelView, StateView, VerifyView};
use crate::session::Session;
use crate::DEFAULT_GRAPH_CAP;

pub struct AppState {
    loaded: Arc<Loaded>,
    model: Arc<rybu_core::imds::SystemModel>,
    limits: ExplorationLimits,
    sessions: Mutex<HashMap<u64, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(loaded: Loaded, limits: ExplorationLimits) -> Arc<Self> {
        let model = Arc::new(loaded.model.clone());
        Arc::new(Self {
            loaded: Arc::new(loaded),
            model,
            limits,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn session(&self, id: &str) -> Option<(u64, Arc<Mutex<Session>>)> {
        let n = id.parse::<u64>().ok()?;
        let session = self
            .sessions
            .lock()
            .expect("session table")
            .get(&n)?
            .clone();
        Some((n, session))
    }

    fn state_view(&self, id: u64, session: &Session) -> StateView {
        StateView::new(&self.loaded, session.current(), session.depth(), Some(id))
    }

    fn conflict(&self, message: String, session: &Session) -> Response {
        let enabled = session
            .enabled()
            .into_iter()
            .map(|a| ActionView::new(&self.model, a))
            .collect();
        let body = ErrorView {
            enabled: Some(enabled),
            ..ErrorView::new(message)
        };
        (StatusCode::CONFLICT, Json(body)).into_response()
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorView::new(message))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/undo", post(undo))
        .route("/model", get(model))
        .route("/verify", get(verify))
        .route("/graph", get(graph))
        .with_state(state)
}

/// Serves the API on the loopback interface until the process ends.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

async fn create_session(State(app): State<Arc<AppState>>) -> Response {
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let session = Session::new(app.model.clone());
    let view = app.state_view(id, &session);
    app.sessions
        .lock()
        .expect("session table")
        .insert(id, Arc::new(Mutex::new(session)));
    (StatusCode::CREATED, Json(view)).into_response()
}

async fn session_state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some((n, session)) = app.session(&id) else {
        return not_found(&id);
    };
    let session = session.lock().expect("session");
    Json(app.state_view(n, &session)).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    action_id: usize,
}

async fn step(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some((n, session)) = app.session(&id) else {
        return not_found(&id);
    };
    let request: StepRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("malformed body: {e}"),
            )
        }
    };
    let mut session = session.lock().expect("session");
    if request.action_id >= app.model.actions().len() {
        let message = format!("action {} does not exist", request.action_id);
        return app.conflict(message, &session);
    }
    match session.step(ActionId::from_index(request.action_id)) {
        Ok(_) => Json(app.state_view(n, &session)).into_response(),
        Err(e) => app.conflict(e.to_string(), &session),
    }
}

async fn undo(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some((n, session)) = app.session(&id) else {
        return not_found(&id);
    };
    let mut session = session.lock().expect("session");
    if session.undo() {
        Json(app.state_view(n, &session)).into_response()
    } else {
        app.conflict("already at the initial configuration".into(), &session)
    }
}

async fn model(State(app): State<Arc<AppState>>) -> Response {
    Json(ModelView::new(&app.model)).into_response()
}

async fn verify(State(app): State<Arc<AppState>>) -> Response {
    let work = tokio::task::spawn_blocking(move || {
        let (lts, report) = check(&app.model, &app.limits);
        VerifyView::new(&app.model, &lts, &report)
    });
    match work.await {
        Ok(view) => Json(view).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Deserialize)]
struct GraphQuery {
    cap: Option<usize>,
}

async fn graph(State(app): State<Arc<AppState>>, Query(query): Query<GraphQuery>) -> Response {
    let cap = query.cap.unwrap_or(DEFAULT_GRAPH_CAP);
    let work = tokio::task::spawn_blocking(move || {
        let limits = ExplorationLimits {
            max_nodes: app.limits.max_nodes.min(cap.saturating_add(1)),
            ..app.limits
        };
        let lts = build_lts(&app.model, &limits);
        if lts.node_count() > cap {
            return Err(lts.node_count());
        }
        Ok(GraphView::new(&app.model, &lts))
    });
    match work.await {
        Ok(Ok(view)) => Json(view).into_response(),
        Ok(Err(nodes)) => error(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("the graph has more than {cap} nodes ({nodes} explored); raise `cap`"),
        ),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}
