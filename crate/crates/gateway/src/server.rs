//! HTTP and WebSocket endpoints.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rosdeck_core::config::{self, ConfigError};
use serde_json::json;
use tokio::sync::oneshot;

use crate::hub::ClientQueue;
use crate::protocol::{self, ClientMessage, ConnState, Status};
use crate::session::Gateway;

pub fn router(gw: Gateway) -> Router {
    Router::new()
        .route("/api/config", get(get_config).put(put_config))
        .route("/api/connect", post(connect))
        .route("/api/disconnect", post(disconnect))
        .route("/api/status", get(status))
        .route("/ws", get(ws))
        .with_state(gw)
}

fn status_body(s: &Status) -> serde_json::Value {
    serde_json::from_str(&protocol::status_json(s)).expect("status serializes")
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("blocking task panicked")
}

async fn get_config(State(gw): State<Gateway>) -> Json<rosdeck_core::config::AppConfig> {
    Json(gw.config())
}

async fn put_config(State(gw): State<Gateway>, body: String) -> Response {
    let cfg = match config::parse_config(&body) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    match blocking(move || gw.replace_config(cfg)).await {
        Ok(s) => Json(status_body(&s)).into_response(),
        Err(e) => config_error(e),
    }
}

fn config_error(e: ConfigError) -> Response {
    let (code, violations) = match &e {
        ConfigError::Invalid(v) => (StatusCode::UNPROCESSABLE_ENTITY, v.clone()),
        ConfigError::Parse(_) => (StatusCode::BAD_REQUEST, vec![]),
        ConfigError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, vec![]),
    };
    (code, Json(json!({"error": e.to_string(), "violations": violations}))).into_response()
}

async fn connect(State(gw): State<Gateway>) -> Response {
    let s = blocking(move || gw.connect()).await;
    let code = if s.state == ConnState::Connected { StatusCode::OK } else { StatusCode::BAD_GATEWAY };
    (code, Json(status_body(&s))).into_response()
}

async fn disconnect(State(gw): State<Gateway>) -> Json<serde_json::Value> {
    let s = blocking(move || gw.disconnect()).await;
    Json(status_body(&s))
}

async fn status(State(gw): State<Gateway>) -> Json<serde_json::Value> {
    Json(status_body(&gw.status()))
}

async fn ws(State(gw): State<Gateway>, upgrade: WebSocketUpgrade) -> Response {
    upgrade.on_upgrade(move |socket| client(gw, socket))
}

async fn client(gw: Gateway, socket: WebSocket) {
    use futures_util::{SinkExt, StreamExt};

    let (id, queue) = gw.attach_client();
    let (mut tx, mut rx) = socket.split();
    let writer_queue: Arc<ClientQueue> = queue.clone();
    let mut writer = tokio::spawn(async move {
        while let Some(m) = writer_queue.pop().await {
            if tx.send(Message::Text(m.text.as_ref().into())).await.is_err() {
                break;
            }
        }
        let _ = tx.close().await;
    });
    loop {
        tokio::select! {
            _ = &mut writer => break,
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    if let Err(reason) = handle_text(&gw, text.as_str()) {
                        queue.push(crate::hub::Outgoing { text: protocol::error_json(&reason).into(), droppable: false });
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    queue.push(crate::hub::Outgoing { text: protocol::error_json("binary frames are not supported").into(), droppable: false });
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            }
        }
    }
    gw.detach_client(id);
    let _ = writer.await;
}

fn handle_text(gw: &Gateway, text: &str) -> Result<(), String> {
    match ClientMessage::parse(text)? {
        ClientMessage::Joystick { widget, sample } => gw.joystick(&widget, sample).map_err(|e| e.to_string()),
    }
}

/// A server running on its own runtime thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}/ws", self.addr)
    }

    pub fn shutdown(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Binds `addr` and serves `gw` until the handle is shut down.
pub fn spawn_server(gw: Gateway, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind(addr))?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new().name("gateway-http".into()).spawn(move || {
        rt.block_on(async move {
            let serve = axum::serve(listener, router(gw)).with_graceful_shutdown(async {
                let _ = stopped.await;
            });
            if let Err(e) = serve.await {
                tracing::error!("http server failed: {e}");
            }
        });
        rt.shutdown_timeout(std::time::Duration::from_secs(1));
    })?;
    Ok(ServerHandle { addr, stop: Some(stop), thread: Some(thread) })
}
