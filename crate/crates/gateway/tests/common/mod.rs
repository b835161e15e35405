#![allow(dead_code)]

use std::net::TcpStream;
use std::time::{Duration, Instant};

use rosdeck_core::config::{AppConfig, WidgetConfig, WidgetKind};
use rosdeck_core::master_api::MasterUri;
use rosdeck_gateway::{spawn_server, Gateway, GatewayOptions, ServerHandle};
use rosdeck_sim::Sim;
use serde_json::Value;
use tungstenite::{Message, WebSocket};

pub fn demo_config(master: MasterUri) -> AppConfig {
    AppConfig {
        version: 1,
        name: "apartment-demo".into(),
        master_uri: master,
        widgets: vec![
            WidgetConfig { id: "joy1".into(), topic: "/cmd_vel".into(), kind: WidgetKind::joystick() },
            WidgetConfig { id: "map1".into(), topic: "/map".into(), kind: WidgetKind::Gridmap },
            WidgetConfig { id: "log1".into(), topic: "/rosout".into(), kind: WidgetKind::Logger { min_level: 2 } },
        ],
    }
}

pub fn local_options() -> GatewayOptions {
    GatewayOptions { advertise_host: Some("127.0.0.1".into()), ..Default::default() }
}

/// Sim, gateway and its HTTP server on loopback.
pub struct Rig {
    pub server: ServerHandle,
    pub gw: Gateway,
    pub sim: Sim,
}

impl Rig {
    pub fn start() -> Rig {
        let sim = Sim::start_local().expect("sim starts");
        Rig::with_config(sim, |c| c)
    }

    pub fn with_config(sim: Sim, edit: impl FnOnce(AppConfig) -> AppConfig) -> Rig {
        let cfg = edit(demo_config(sim.master_uri()));
        let gw = Gateway::new(cfg, None, local_options());
        let server = spawn_server(gw.clone(), "127.0.0.1:0".parse().unwrap()).expect("server binds");
        Rig { server, gw, sim }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.server.base_url(), path)
    }

    /// Waits until the sim robot has a TCPROS link to the joystick topic.
    pub fn wait_joystick_link(&self, widget: &str) {
        assert!(
            wait_until(Duration::from_secs(3), || self.gw.joystick_subscribers(widget).unwrap_or(0) > 0),
            "robot never connected to {widget}"
        );
    }
}

impl Drop for Rig {
    fn drop(&mut self) {
        self.server.shutdown();
        self.gw.disconnect();
    }
}

pub fn wait_until(limit: Duration, mut f: impl FnMut() -> bool) -> bool {
    let end = Instant::now() + limit;
    loop {
        if f() {
            return true;
        }
        if Instant::now() >= end {
            return false;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
}

/// Returns (status code, JSON body) for any status.
pub fn http(method: &str, url: &str, body: Option<&str>) -> (u16, Value) {
    let req = ureq::request(method, url).timeout(Duration::from_secs(10));
    let res = match body {
        Some(b) => req.set("content-type", "application/json").send_string(b),
        None => req.call(),
    };
    let res = match res {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("{method} {url}: {e}"),
    };
    let code = res.status();
    let text = res.into_string().expect("body");
    (code, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

pub struct WsClient {
    ws: WebSocket<TcpStream>,
}

impl WsClient {
    pub fn connect(url: &str) -> WsClient {
        let addr = url.trim_start_matches("ws://").split('/').next().unwrap().to_string();
        let stream = TcpStream::connect(addr).expect("tcp connect");
        stream.set_read_timeout(Some(Duration::from_millis(50))).unwrap();
        let (ws, _) = tungstenite::client(url, stream).expect("ws handshake");
        WsClient { ws }
    }

    pub fn send(&mut self, v: &Value) {
        self.ws.send(Message::text(v.to_string())).expect("ws send");
    }

    pub fn send_text(&mut self, t: &str) {
        self.ws.send(Message::text(t)).expect("ws send");
    }

    pub fn joystick(&mut self, widget: &str, x: f64, y: f64, engaged: bool) {
        self.send(&serde_json::json!({"type": "joystick", "widget": widget, "x": x, "y": y, "engaged": engaged}));
    }

    /// Next JSON event, or `None` if nothing arrives within `limit`.
    pub fn next(&mut self, limit: Duration) -> Option<Value> {
        let end = Instant::now() + limit;
        loop {
            match self.ws.read() {
                Ok(Message::Text(t)) => return Some(serde_json::from_str(t.as_str()).expect("server sends JSON")),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) =>
                {
                    if Instant::now() >= end {
                        return None;
                    }
                }
                Err(e) => panic!("ws read: {e}"),
            }
        }
    }

    /// Skips events until one satisfies `pred`.
    pub fn wait_for(&mut self, limit: Duration, mut pred: impl FnMut(&Value) -> bool) -> Option<Value> {
        let end = Instant::now() + limit;
        while Instant::now() < end {
            if let Some(v) = self.next(end - Instant::now()) {
                if pred(&v) {
                    return Some(v);
                }
            }
        }
        None
    }
}

pub fn is_type(v: &Value, t: &str) -> bool {
    v["type"] == t
}
