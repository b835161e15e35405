//! Reference ROS master: registry plus the XML-RPC master API.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{mpsc, Arc, Mutex, OnceLock};
use std::thread::JoinHandle;
use std::time::Duration;

use rosdeck_core::master_api::{RpcResult, SystemState};
use rosdeck_core::xmlrpc::{Fault, RpcHandler, RpcServer, Value, XmlRpcClient};

/// Caller id the master uses in `publisherUpdate` calls.
pub const MASTER_CALLER_ID: &str = "/master";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registration {
    pub caller_id: String,
    pub uri: String,
}

/// A `publisherUpdate` the master owes to one subscriber.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notification {
    pub subscriber_uri: String,
    pub topic: String,
    pub publishers: Vec<String>,
}

/// Per-topic publisher and subscriber sets plus the topic type map.
#[derive(Debug, Default, Clone)]
pub struct MasterRegistry {
    publishers: BTreeMap<String, Vec<Registration>>,
    subscribers: BTreeMap<String, Vec<Registration>>,
    topic_types: BTreeMap<String, String>,
}

fn upsert(list: &mut Vec<Registration>, caller_id: &str, uri: &str) {
    match list.iter_mut().find(|r| r.caller_id == caller_id) {
        Some(r) => r.uri = uri.to_string(),
        None => list.push(Registration { caller_id: caller_id.into(), uri: uri.into() }),
    }
}

fn remove(map: &mut BTreeMap<String, Vec<Registration>>, caller_id: &str, topic: &str, uri: &str) -> i32 {
    let Some(list) = map.get_mut(topic) else { return 0 };
    let before = list.len();
    list.retain(|r| !(r.caller_id == caller_id && r.uri == uri));
    let removed = (before - list.len()) as i32;
    if list.is_empty() {
        map.remove(topic);
    }
    removed
}

fn uris(list: Option<&Vec<Registration>>) -> Vec<String> {
    list.map(|l| l.iter().map(|r| r.uri.clone()).collect()).unwrap_or_default()
}

impl MasterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the current subscriber URIs and the updates to send.
    pub fn register_publisher(
        &mut self,
        caller_id: &str,
        topic: &str,
        topic_type: &str,
        uri: &str,
    ) -> (Vec<String>, Vec<Notification>) {
        if topic_type != "*" {
            self.topic_types.insert(topic.to_string(), topic_type.to_string());
        }
        upsert(self.publishers.entry(topic.to_string()).or_default(), caller_id, uri);
        (self.subscriber_uris(topic), self.notifications(topic))
    }

    /// Returns the current publisher URIs.
    pub fn register_subscriber(&mut self, caller_id: &str, topic: &str, topic_type: &str, uri: &str) -> Vec<String> {
        if topic_type != "*" && !self.topic_types.contains_key(topic) {
            self.topic_types.insert(topic.to_string(), topic_type.to_string());
        }
        upsert(self.subscribers.entry(topic.to_string()).or_default(), caller_id, uri);
        self.publisher_uris(topic)
    }

    pub fn unregister_publisher(&mut self, caller_id: &str, topic: &str, uri: &str) -> (i32, Vec<Notification>) {
        let n = remove(&mut self.publishers, caller_id, topic, uri);
        let notes = if n > 0 { self.notifications(topic) } else { Vec::new() };
        (n, notes)
    }

    pub fn unregister_subscriber(&mut self, caller_id: &str, topic: &str, uri: &str) -> i32 {
        remove(&mut self.subscribers, caller_id, topic, uri)
    }

    pub fn publisher_uris(&self, topic: &str) -> Vec<String> {
        uris(self.publishers.get(topic))
    }

    pub fn subscriber_uris(&self, topic: &str) -> Vec<String> {
        uris(self.subscribers.get(topic))
    }

    fn notifications(&self, topic: &str) -> Vec<Notification> {
        let publishers = self.publisher_uris(topic);
        self.subscriber_uris(topic)
            .into_iter()
            .map(|s| Notification { subscriber_uri: s, topic: topic.into(), publishers: publishers.clone() })
            .collect()
    }

    /// Slave URI of a node from any of its registrations.
    pub fn lookup_node(&self, name: &str) -> Option<String> {
        self.publishers
            .values()
            .chain(self.subscribers.values())
            .flatten()
            .find(|r| r.caller_id == name)
            .map(|r| r.uri.clone())
    }

    pub fn topic_types(&self) -> Vec<(String, String)> {
        self.topic_types
            .iter()
            .filter(|(t, _)| self.publishers.contains_key(*t) || self.subscribers.contains_key(*t))
            .map(|(t, ty)| (t.clone(), ty.clone()))
            .collect()
    }

    pub fn system_state(&self) -> SystemState {
        let side = |m: &BTreeMap<String, Vec<Registration>>| {
            m.iter()
                .map(|(t, regs)| (t.clone(), regs.iter().map(|r| r.caller_id.clone()).collect()))
                .collect()
        };
        SystemState { publishers: side(&self.publishers), subscribers: side(&self.subscribers), services: Vec::new() }
    }
}

fn state_value(list: &[(String, Vec<String>)]) -> Value {
    Value::Array(
        list.iter()
            .map(|(t, nodes)| Value::Array(vec![t.as_str().into(), Value::from(nodes.clone())]))
            .collect(),
    )
}

fn str_arg(params: &[Value], i: usize) -> Result<&str, RpcResult> {
    params
        .get(i)
        .and_then(Value::as_str)
        .ok_or_else(|| RpcResult::error(format!("argument {i} must be a string"), 0))
}

struct Shared {
    registry: Mutex<MasterRegistry>,
    notify: Mutex<mpsc::Sender<Vec<Notification>>>,
    uri: OnceLock<String>,
}

impl Shared {
    fn enqueue(&self, notes: Vec<Notification>) {
        if !notes.is_empty() {
            let _ = self.notify.lock().unwrap().send(notes);
        }
    }

    fn dispatch(&self, method: &str, params: &[Value]) -> Result<Value, Fault> {
        let result = match method {
            "registerPublisher" | "registerSubscriber" | "unregisterPublisher" | "unregisterSubscriber"
            | "lookupNode" | "getSystemState" | "getTopicTypes" | "getPublishedTopics" | "getPid"
            | "getUri" => self.handle(method, params).unwrap_or_else(|e| e),
            other => return Err(Fault::new(1, format!("unknown method {other}"))),
        };
        Ok(result.into_value())
    }

    fn handle(&self, method: &str, p: &[Value]) -> Result<RpcResult, RpcResult> {
        let caller = str_arg(p, 0)?;
        let topic_arg = |i| {
            let t = str_arg(p, i)?;
            if t.starts_with('/') {
                Ok(t)
            } else {
                Err(RpcResult::error(format!("topic {t} is not a global name"), 0))
            }
        };
        Ok(match method {
            "registerPublisher" => {
                let (topic, ty, api) = (topic_arg(1)?, str_arg(p, 2)?, str_arg(p, 3)?);
                let mut reg = self.registry.lock().unwrap();
                let (subs, notes) = reg.register_publisher(caller, topic, ty, api);
                // Enqueued under the registry lock so updates leave in registry order.
                self.enqueue(notes);
                RpcResult::ok(format!("Registered [{caller}] as publisher of [{topic}]"), subs)
            }
            "registerSubscriber" => {
                let (topic, ty, api) = (topic_arg(1)?, str_arg(p, 2)?, str_arg(p, 3)?);
                let pubs = self.registry.lock().unwrap().register_subscriber(caller, topic, ty, api);
                RpcResult::ok(format!("Subscribed to [{topic}]"), pubs)
            }
            "unregisterPublisher" => {
                let (topic, api) = (topic_arg(1)?, str_arg(p, 2)?);
                let mut reg = self.registry.lock().unwrap();
                let (n, notes) = reg.unregister_publisher(caller, topic, api);
                self.enqueue(notes);
                RpcResult::ok(format!("Unregistered {n} publisher(s) of [{topic}]"), n)
            }
            "unregisterSubscriber" => {
                let (topic, api) = (topic_arg(1)?, str_arg(p, 2)?);
                let n = self.registry.lock().unwrap().unregister_subscriber(caller, topic, api);
                RpcResult::ok(format!("Unregistered {n} subscriber(s) of [{topic}]"), n)
            }
            "lookupNode" => {
                let name = str_arg(p, 1)?;
                match self.registry.lock().unwrap().lookup_node(name) {
                    Some(uri) => RpcResult::ok("node api", uri),
                    None => RpcResult::error(format!("unknown node [{name}]"), ""),
                }
            }
            "getSystemState" => {
                let s = self.registry.lock().unwrap().system_state();
                let v = Value::Array(vec![
                    state_value(&s.publishers),
                    state_value(&s.subscribers),
                    state_value(&s.services),
                ]);
                RpcResult::ok("current system state", v)
            }
            "getTopicTypes" => {
                let types = self.registry.lock().unwrap().topic_types();
                RpcResult::ok("current topics", pairs(types))
            }
            "getPublishedTopics" => {
                let reg = self.registry.lock().unwrap();
                let types: Vec<(String, String)> =
                    reg.topic_types().into_iter().filter(|(t, _)| !reg.publisher_uris(t).is_empty()).collect();
                RpcResult::ok("current topics", pairs(types))
            }
            "getPid" => RpcResult::ok("", std::process::id() as i32),
            "getUri" => RpcResult::ok("", self.uri.get().map(String::as_str).unwrap_or("")),
            _ => unreachable!("filtered by dispatch"),
        })
    }
}

fn pairs(list: Vec<(String, String)>) -> Value {
    Value::Array(list.into_iter().map(|(a, b)| Value::from(vec![a, b])).collect())
}

fn notifier_loop(rx: mpsc::Receiver<Vec<Notification>>) {
    for batch in rx {
        for n in batch {
            let client = XmlRpcClient::new(n.subscriber_uri.clone(), Duration::from_secs(2));
            let params = [MASTER_CALLER_ID.into(), n.topic.as_str().into(), Value::from(n.publishers.clone())];
            if let Err(e) = client.call("publisherUpdate", &params) {
                tracing::info!(subscriber = %n.subscriber_uri, topic = %n.topic, "publisherUpdate failed: {e}");
            }
        }
    }
}

/// A running master.
pub struct MasterServer {
    shared: Arc<Shared>,
    rpc: Option<RpcServer>,
    notifier: Option<JoinHandle<()>>,
}

impl MasterServer {
    /// Binds the master API on `addr` (port 0 picks a free port).
    pub fn bind(addr: SocketAddr) -> std::io::Result<MasterServer> {
        let (tx, rx) = mpsc::channel();
        let shared = Arc::new(Shared {
            registry: Mutex::new(MasterRegistry::new()),
            notify: Mutex::new(tx),
            uri: OnceLock::new(),
        });
        let handler: RpcHandler = {
            let shared = shared.clone();
            Arc::new(move |m: &str, p: &[Value]| shared.dispatch(m, p))
        };
        let rpc = RpcServer::bind(addr, handler)?;
        let bound = rpc.local_addr();
        let host = if bound.ip().is_unspecified() { "127.0.0.1".to_string() } else { bound.ip().to_string() };
        let _ = shared.uri.set(format!("http://{host}:{}/", bound.port()));
        let notifier = std::thread::Builder::new().name("master-notify".into()).spawn(move || notifier_loop(rx))?;
        Ok(MasterServer { shared, rpc: Some(rpc), notifier: Some(notifier) })
    }

    /// `http://host:port/`
    pub fn uri(&self) -> &str {
        self.shared.uri.get().map(String::as_str).unwrap_or("")
    }

    pub fn port(&self) -> u16 {
        self.rpc.as_ref().map(|r| r.local_addr().port()).unwrap_or(0)
    }

    /// A copy of the registry for inspection.
    pub fn registry(&self) -> MasterRegistry {
        self.shared.registry.lock().unwrap().clone()
    }

    pub fn shutdown(&mut self) {
        if let Some(mut rpc) = self.rpc.take() {
            rpc.shutdown();
        }
        // Closing the channel ends the notifier once pending updates are sent.
        let (dead, _) = mpsc::channel();
        *self.shared.notify.lock().unwrap() = dead;
        if let Some(t) = self.notifier.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MasterServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}
