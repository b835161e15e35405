//! JSON messages on the dashboard WebSocket.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::frame::{FrameOrigin, GridFrame};
use crate::teleop::JoystickSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnState {
    Disconnected,
    Connecting,
    Connected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Status {
    pub state: ConnState,
    pub master: String,
    pub warnings: Vec<String>,
    /// Why the last connect attempt failed, while disconnected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub widget: String,
    pub level: u8,
    pub name: String,
    pub msg: String,
    pub stamp: f64,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Joystick { widget: String, sample: JoystickSample },
}

#[derive(Deserialize)]
struct JoystickWire {
    widget: String,
    x: f64,
    y: f64,
    engaged: bool,
}

impl ClientMessage {
    /// Parses one text frame; the error string goes back to the client.
    pub fn parse(text: &str) -> Result<ClientMessage, String> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
        let ty = v.get("type").and_then(|t| t.as_str()).ok_or("missing \"type\"")?;
        match ty {
            "joystick" => {
                let j: JoystickWire = serde_json::from_value(v.clone()).map_err(|e| format!("bad joystick message: {e}"))?;
                Ok(ClientMessage::Joystick { widget: j.widget, sample: JoystickSample::new(j.x, j.y, j.engaged) })
            }
            other => Err(format!("unknown message type {other:?}")),
        }
    }
}

pub fn status_json(s: &Status) -> String {
    let mut v = serde_json::to_value(s).expect("plain struct");
    v["type"] = json!("status");
    v.to_string()
}

pub fn frame_json(f: &GridFrame) -> String {
    json!({
        "type": "gridmap_frame",
        "widget": f.widget,
        "width": f.width,
        "height": f.height,
        "resolution": f.resolution,
        "origin": f.origin,
        "cells_b64": B64.encode(&f.cells),
        "seq": f.seq,
    })
    .to_string()
}

pub fn log_json(l: &LogEvent) -> String {
    json!({
        "type": "log",
        "widget": l.widget,
        "level": l.level,
        "name": l.name,
        "msg": l.msg,
        "stamp": l.stamp,
    })
    .to_string()
}

pub fn error_json(reason: &str) -> String {
    json!({"type": "error", "reason": reason}).to_string()
}

/// Decodes a `gridmap_frame` event back into a frame.
pub fn parse_frame(v: &serde_json::Value) -> Option<GridFrame> {
    if v.get("type")?.as_str()? != "gridmap_frame" {
        return None;
    }
    let o = v.get("origin")?;
    Some(GridFrame {
        widget: v.get("widget")?.as_str()?.to_string(),
        width: v.get("width")?.as_u64()? as u32,
        height: v.get("height")?.as_u64()? as u32,
        resolution: v.get("resolution")?.as_f64()?,
        origin: FrameOrigin { x: o.get("x")?.as_f64()?, y: o.get("y")?.as_f64()?, yaw: o.get("yaw")?.as_f64()? },
        cells: B64.decode(v.get("cells_b64")?.as_str()?).ok()?,
        seq: v.get("seq").and_then(|s| s.as_u64()).unwrap_or(0) as u32,
    })
}
