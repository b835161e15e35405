//! Persistent app configuration: a master URI plus the widget list.
//!
//! Stored as one UTF-8 JSON document:
//!
//! ```json
//! {"version":1,"name":"apartment-demo","master_uri":"http://127.0.0.1:11311",
//!  "widgets":[{"id":"joy1","kind":"joystick","topic":"/cmd_vel","max_linear":0.5,
//!              "max_angular":1.5,"publish_rate_hz":10},
//!             {"id":"map1","kind":"gridmap","topic":"/map"},
//!             {"id":"log1","kind":"logger","topic":"/rosout","min_level":2}]}
//! ```

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::master_api::MasterUri;

pub const CONFIG_VERSION: u32 = 1;
pub const SUPPORTED_KINDS: [&str; 3] = ["joystick", "gridmap", "logger"];

pub const DEFAULT_MAX_LINEAR: f64 = 0.5;
pub const DEFAULT_MAX_ANGULAR: f64 = 1.5;
pub const DEFAULT_PUBLISH_RATE_HZ: f64 = 10.0;
pub const DEFAULT_MIN_LEVEL: u8 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    pub version: u32,
    pub name: String,
    pub master_uri: MasterUri,
    pub widgets: Vec<WidgetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetConfig {
    pub id: String,
    pub topic: String,
    #[serde(flatten)]
    pub kind: WidgetKind,
}

fn default_max_linear() -> f64 {
    DEFAULT_MAX_LINEAR
}
fn default_max_angular() -> f64 {
    DEFAULT_MAX_ANGULAR
}
fn default_rate() -> f64 {
    DEFAULT_PUBLISH_RATE_HZ
}
fn default_min_level() -> u8 {
    DEFAULT_MIN_LEVEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WidgetKind {
    Joystick {
        /// m/s at full deflection.
        #[serde(default = "default_max_linear")]
        max_linear: f64,
        /// rad/s at full deflection.
        #[serde(default = "default_max_angular")]
        max_angular: f64,
        #[serde(default = "default_rate")]
        publish_rate_hz: f64,
    },
    Gridmap,
    Logger {
        #[serde(default = "default_min_level")]
        min_level: u8,
    },
}

impl WidgetKind {
    pub fn joystick() -> Self {
        WidgetKind::Joystick {
            max_linear: DEFAULT_MAX_LINEAR,
            max_angular: DEFAULT_MAX_ANGULAR,
            publish_rate_hz: DEFAULT_PUBLISH_RATE_HZ,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WidgetKind::Joystick { .. } => "joystick",
            WidgetKind::Gridmap => "gridmap",
            WidgetKind::Logger { .. } => "logger",
        }
    }
}

/// One failed invariant, located by a field path such as `widgets[0].max_linear`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {}", join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn positive(value: f64, path: String, out: &mut Vec<Violation>) {
    if !value.is_finite() || value <= 0.0 {
        out.push(Violation::new(path, format!("must be finite and positive, got {value}")));
    }
}

/// Empty iff the config satisfies every invariant.
pub fn validate_config(cfg: &AppConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if cfg.version != CONFIG_VERSION {
        out.push(Violation::new("version", format!("must be {CONFIG_VERSION}, got {}", cfg.version)));
    }
    let mut seen = HashSet::new();
    for (i, w) in cfg.widgets.iter().enumerate() {
        let at = |field: &str| format!("widgets[{i}].{field}");
        if w.id.is_empty() {
            out.push(Violation::new(at("id"), "must not be empty"));
        } else if !seen.insert(w.id.as_str()) {
            out.push(Violation::new(at("id"), format!("duplicate widget id `{}`", w.id)));
        }
        if !w.topic.starts_with('/') || w.topic.len() < 2 {
            out.push(Violation::new(at("topic"), format!("must start with '/', got `{}`", w.topic)));
        }
        match &w.kind {
            WidgetKind::Joystick { max_linear, max_angular, publish_rate_hz } => {
                positive(*max_linear, at("max_linear"), &mut out);
                positive(*max_angular, at("max_angular"), &mut out);
                positive(*publish_rate_hz, at("publish_rate_hz"), &mut out);
            }
            WidgetKind::Gridmap => {}
            WidgetKind::Logger { min_level } => {
                if ![1, 2, 4, 8, 16].contains(min_level) {
                    out.push(Violation::new(at("min_level"), "must be one of 1, 2, 4, 8, 16"));
                }
            }
        }
    }
    out
}

fn check_kinds(raw: &serde_json::Value) -> Vec<Violation> {
    let Some(widgets) = raw.get("widgets").and_then(|w| w.as_array()) else {
        return Vec::new();
    };
    widgets
        .iter()
        .enumerate()
        .filter_map(|(i, w)| {
            let path = format!("widgets[{i}].kind");
            match w.get("kind") {
                Some(serde_json::Value::String(k)) if SUPPORTED_KINDS.contains(&k.as_str()) => None,
                Some(k) => Some(Violation::new(
                    path,
                    format!("unknown widget kind {k}; supported kinds: {}", SUPPORTED_KINDS.join(", ")),
                )),
                None => Some(Violation::new(
                    path,
                    format!("missing; supported kinds: {}", SUPPORTED_KINDS.join(", ")),
                )),
            }
        })
        .collect()
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<AppConfig, ConfigError> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let kinds = check_kinds(&raw);
    if !kinds.is_empty() {
        return Err(ConfigError::Invalid(kinds));
    }
    let cfg: AppConfig = serde_json::from_value(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let violations = validate_config(&cfg);
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<AppConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

/// A fully written temp file next to its destination, not yet renamed over it.
pub struct StagedConfig {
    file: tempfile::NamedTempFile,
    dest: PathBuf,
}

impl StagedConfig {
    /// Atomically replaces the destination.
    pub fn commit(self) -> Result<(), ConfigError> {
        let dest = self.dest;
        self.file
            .persist(&dest)
            .map(|_| ())
            .map_err(|e| ConfigError::Io { path: dest, source: e.error })
    }
}

/// Validates `cfg` and writes it to a temp file beside `path`.
pub fn stage_config(cfg: &AppConfig, path: impl AsRef<Path>) -> Result<StagedConfig, ConfigError> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    let dest = path.as_ref().to_path_buf();
    let dir = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |source| ConfigError::Io { path: dest.clone(), source };
    let mut file = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    let text = serde_json::to_string_pretty(cfg).map_err(|e| ConfigError::Parse(e.to_string()))?;
    file.write_all(text.as_bytes()).map_err(io)?;
    file.write_all(b"\n").map_err(io)?;
    file.as_file().sync_all().map_err(io)?;
    Ok(StagedConfig { file, dest })
}

/// Writes `cfg` atomically (temp file + rename). Invalid configs never touch disk.
pub fn save_config(cfg: &AppConfig, path: impl AsRef<Path>) -> Result<(), ConfigError> {
    stage_config(cfg, path)?.commit()
}
