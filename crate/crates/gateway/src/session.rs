//! The gateway session: one active config, one node while connected, and
//! the widget pipelines hanging off it.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rosdeck_core::config::{self, AppConfig, ConfigError, WidgetConfig, WidgetKind};
use rosdeck_core::msg::{Log, OccupancyGrid, RosMessage, Twist};
use rosdeck_core::node::{NodeHandle, NodeOptions};

use crate::frame::{gridmap_to_frame, GridFrame, DEFAULT_BUDGET};
use crate::hub::{ClientQueue, Hub, Outgoing};
use crate::protocol::{self, ConnState, LogEvent, Status};
use crate::teleop::{JoystickSample, TeleopSession, TeleopWorker};

pub const DEFAULT_CALLER_ID: &str = "/rosdeck_gateway";

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub caller_id: String,
    pub rpc_timeout: Duration,
    /// Host advertised to the master; resolved automatically when unset.
    pub advertise_host: Option<String>,
    pub frame_budget: u32,
    pub client_queue: usize,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        GatewayOptions {
            caller_id: DEFAULT_CALLER_ID.into(),
            rpc_timeout: Duration::from_secs(2),
            advertise_host: None,
            frame_budget: DEFAULT_BUDGET,
            client_queue: crate::hub::DEFAULT_CLIENT_QUEUE,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RouteError {
    #[error("not connected")]
    NotConnected,
    #[error("no joystick widget `{0}`")]
    UnknownWidget(String),
}

struct SessionState {
    status: Status,
    config: AppConfig,
    frames: BTreeMap<String, GridFrame>,
    /// Highest grid seq delivered, per widget and publisher.
    frame_seqs: HashMap<(String, String), u32>,
    last_sample: HashMap<String, Instant>,
}

struct Inner {
    opts: GatewayOptions,
    config_path: Option<PathBuf>,
    hub: Hub,
    state: Mutex<SessionState>,
    /// Serializes connect, disconnect and config replacement.
    op: Mutex<Option<NodeHandle>>,
    joysticks: Mutex<HashMap<String, TeleopWorker>>,
    generation: AtomicU64,
}

/// Cheap to clone; all clones share one session.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

fn disconnected(cfg: &AppConfig, reason: Option<String>) -> Status {
    Status { state: ConnState::Disconnected, master: cfg.master_uri.to_string(), warnings: vec![], reason }
}

impl Gateway {
    pub fn new(config: AppConfig, config_path: Option<PathBuf>, opts: GatewayOptions) -> Gateway {
        let status = disconnected(&config, None);
        Gateway {
            inner: Arc::new(Inner {
                opts,
                config_path,
                hub: Hub::new(),
                state: Mutex::new(SessionState {
                    status,
                    config,
                    frames: BTreeMap::new(),
                    frame_seqs: HashMap::new(),
                    last_sample: HashMap::new(),
                }),
                op: Mutex::new(None),
                joysticks: Mutex::new(HashMap::new()),
                generation: AtomicU64::new(0),
            }),
        }
    }

    pub fn status(&self) -> Status {
        self.inner.state.lock().unwrap().status.clone()
    }

    pub fn config(&self) -> AppConfig {
        self.inner.state.lock().unwrap().config.clone()
    }

    pub fn latest_frame(&self, widget: &str) -> Option<GridFrame> {
        self.inner.state.lock().unwrap().frames.get(widget).cloned()
    }

    pub fn last_sample_at(&self, widget: &str) -> Option<Instant> {
        self.inner.state.lock().unwrap().last_sample.get(widget).copied()
    }

    /// Connected subscribers of a joystick widget's topic.
    pub fn joystick_subscribers(&self, widget: &str) -> Option<usize> {
        self.inner.joysticks.lock().unwrap().get(widget).map(|w| w.num_subscribers())
    }

    pub fn client_count(&self) -> usize {
        self.inner.hub.client_count()
    }

    /// Registers a dashboard client. Its queue starts with the current
    /// status and the latest frame of each gridmap widget.
    pub fn attach_client(&self) -> (u64, Arc<ClientQueue>) {
        let st = self.inner.state.lock().unwrap();
        let (id, q) = self.inner.hub.register(self.inner.opts.client_queue);
        q.push(Outgoing { text: protocol::status_json(&st.status).into(), droppable: false });
        for f in st.frames.values() {
            q.push(Outgoing { text: protocol::frame_json(f).into(), droppable: true });
        }
        (id, q)
    }

    pub fn detach_client(&self, id: u64) {
        self.inner.hub.unregister(id);
    }

    fn set_status(&self, st: &mut SessionState, status: Status) {
        st.status = status;
        self.inner.hub.broadcast(protocol::status_json(&st.status), false);
    }

    /// Connects with the active config, replacing any existing connection.
    pub fn connect(&self) -> Status {
        let mut op = self.inner.op.lock().unwrap();
        self.teardown(&mut op);
        let cfg = {
            let mut st = self.inner.state.lock().unwrap();
            let s = Status { state: ConnState::Connecting, master: st.config.master_uri.to_string(), warnings: vec![], reason: None };
            self.set_status(&mut st, s);
            st.config.clone()
        };
        let generation = self.inner.generation.fetch_add(1, Ordering::SeqCst) + 1;
        let result = self.open(&cfg, generation);
        let mut st = self.inner.state.lock().unwrap();
        match result {
            Ok((node, warnings)) => {
                *op = Some(node);
                let s = Status { state: ConnState::Connected, master: cfg.master_uri.to_string(), warnings, reason: None };
                self.set_status(&mut st, s);
            }
            Err(reason) => {
                tracing::warn!("connect to {} failed: {reason}", cfg.master_uri);
                self.inner.generation.fetch_add(1, Ordering::SeqCst);
                self.set_status(&mut st, disconnected(&cfg, Some(reason)));
            }
        }
        st.status.clone()
    }

    fn open(&self, cfg: &AppConfig, generation: u64) -> Result<(NodeHandle, Vec<String>), String> {
        let mut nopts = NodeOptions::new(self.inner.opts.caller_id.clone(), cfg.master_uri.clone())
            .rpc_timeout(self.inner.opts.rpc_timeout);
        nopts.advertise_host = self.inner.opts.advertise_host.clone();
        let node = NodeHandle::new(nopts).map_err(|e| e.to_string())?;
        if let Err(e) = node.master().get_pid(node.name()) {
            node.shutdown();
            return Err(e.to_string());
        }
        let mut warnings = Vec::new();
        for w in &cfg.widgets {
            if let Err(e) = self.start_widget(&node, w, generation) {
                tracing::warn!(widget = %w.id, "widget setup failed: {e}");
                warnings.push(format!("widget {} ({} on {}): {e}", w.id, w.kind.name(), w.topic));
            }
        }
        Ok((node, warnings))
    }

    fn start_widget(&self, node: &NodeHandle, w: &WidgetConfig, generation: u64) -> Result<(), String> {
        let err = |e: rosdeck_core::node::NodeError| e.to_string();
        match &w.kind {
            WidgetKind::Joystick { max_linear, max_angular, publish_rate_hz } => {
                let publication = node.advertise_typed::<Twist>(&w.topic, false).map_err(err)?;
                let session = TeleopSession::new(*max_linear, *max_angular, *publish_rate_hz);
                let worker = TeleopWorker::spawn(session, publication).map_err(|e| e.to_string())?;
                self.inner.joysticks.lock().unwrap().insert(w.id.clone(), worker);
            }
            WidgetKind::Gridmap => {
                let me = Arc::downgrade(&self.inner);
                let id = w.id.clone();
                node.subscribe_raw(&w.topic, OccupancyGrid::TYPE_NAME, move |raw| {
                    let Some(inner) = me.upgrade() else { return };
                    if inner.generation.load(Ordering::SeqCst) != generation {
                        return;
                    }
                    let frame = OccupancyGrid::decode(&raw.bytes)
                        .map_err(|e| e.to_string())
                        .and_then(|g| gridmap_to_frame(&id, &g, inner.opts.frame_budget).map_err(|e| e.to_string()));
                    match frame {
                        Ok(f) => Gateway { inner }.offer_frame(&raw.publisher, f),
                        Err(e) => tracing::warn!(widget = %id, "dropping grid: {e}"),
                    }
                })
                .map_err(err)?;
            }
            WidgetKind::Logger { min_level } => {
                let me = Arc::downgrade(&self.inner);
                let (id, min) = (w.id.clone(), *min_level);
                node.subscribe::<Log, _>(&w.topic, move |l| {
                    let Some(inner) = me.upgrade() else { return };
                    if inner.generation.load(Ordering::SeqCst) != generation || l.level < min {
                        return;
                    }
                    let ev = LogEvent { widget: id.clone(), level: l.level, name: l.name, msg: l.msg, stamp: l.header.stamp.as_secs_f64() };
                    inner.hub.broadcast(protocol::log_json(&ev), true);
                })
                .map_err(err)?;
            }
        }
        Ok(())
    }

    fn offer_frame(&self, publisher: &str, f: GridFrame) {
        let mut st = self.inner.state.lock().unwrap();
        let key = (f.widget.clone(), publisher.to_string());
        if st.frame_seqs.get(&key).is_some_and(|s| f.seq < *s) {
            tracing::debug!(widget = %f.widget, seq = f.seq, "stale grid dropped");
            return;
        }
        st.frame_seqs.insert(key, f.seq);
        self.inner.hub.broadcast(protocol::frame_json(&f), true);
        st.frames.insert(f.widget.clone(), f);
    }

    fn teardown(&self, op: &mut Option<NodeHandle>) {
        let workers = std::mem::take(&mut *self.inner.joysticks.lock().unwrap());
        // Dropping a worker publishes its final zero.
        drop(workers);
        self.inner.generation.fetch_add(1, Ordering::SeqCst);
        if let Some(node) = op.take() {
            node.shutdown();
        }
        let mut st = self.inner.state.lock().unwrap();
        st.frame_seqs.clear();
        st.last_sample.clear();
    }

    pub fn disconnect(&self) -> Status {
        let mut op = self.inner.op.lock().unwrap();
        self.teardown(&mut op);
        let mut st = self.inner.state.lock().unwrap();
        if st.status.state != ConnState::Disconnected || st.status.reason.is_some() {
            let s = disconnected(&st.config, None);
            self.set_status(&mut st, s);
        }
        st.status.clone()
    }

    /// Validates and installs a new config, persisting it when the gateway
    /// has a config path. Reconnects if currently connected.
    pub fn replace_config(&self, cfg: AppConfig) -> Result<Status, ConfigError> {
        let violations = config::validate_config(&cfg);
        if !violations.is_empty() {
            return Err(ConfigError::Invalid(violations));
        }
        let op = self.inner.op.lock().unwrap();
        if let Some(p) = &self.inner.config_path {
            config::save_config(&cfg, p)?;
        }
        let was_connected = op.is_some();
        {
            let mut st = self.inner.state.lock().unwrap();
            st.config = cfg;
            st.frames.clear();
            if !was_connected {
                let s = disconnected(&st.config, None);
                self.set_status(&mut st, s);
            }
        }
        drop(op);
        Ok(if was_connected { self.connect() } else { self.status() })
    }

    /// Routes a joystick sample to its widget's teleop session.
    pub fn joystick(&self, widget: &str, sample: JoystickSample) -> Result<(), RouteError> {
        let js = self.inner.joysticks.lock().unwrap();
        match js.get(widget) {
            Some(w) => {
                w.send(sample);
                drop(js);
                self.inner.state.lock().unwrap().last_sample.insert(widget.to_string(), Instant::now());
                Ok(())
            }
            None if self.status().state != ConnState::Connected => Err(RouteError::NotConnected),
            None => Err(RouteError::UnknownWidget(widget.to_string())),
        }
    }
}

impl Drop for Inner {
    fn drop(&mut self) {
        self.joysticks.get_mut().unwrap().clear();
        if let Some(node) = self.op.get_mut().unwrap().take() {
            node.shutdown();
        }
    }
}
