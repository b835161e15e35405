//! ROS master API client, slave API server and the `requestTopic` peer call.

use std::fmt;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::xmlrpc::{Fault, RpcHandler, RpcServer, Value, XmlRpcClient, XmlRpcError};

pub const DEFAULT_MASTER_PORT: u16 = 11311;
pub const DEFAULT_CALLER_ID: &str = "/rosdeck_gateway";
pub const DEFAULT_RPC_TIMEOUT: Duration = Duration::from_secs(3);
pub const TCPROS: &str = "TCPROS";

#[derive(Debug, Error)]
pub enum MasterError {
    #[error(transparent)]
    Rpc(#[from] XmlRpcError),
    /// The peer answered with code <= 0.
    #[error("request rejected (code {code}): {status}")]
    Rejected { code: i32, status: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("invalid master URI `{0}`")]
    InvalidUri(String),
    #[error("invalid graph name `{0}`: must start with '/'")]
    InvalidName(String),
    #[error("cannot start slave API server: {0}")]
    Bind(#[source] std::io::Error),
}

impl MasterError {
    /// True when the failure happened on the wire, not in the peer's logic.
    pub fn is_transport(&self) -> bool {
        matches!(self, MasterError::Rpc(XmlRpcError::Transport(_) | XmlRpcError::Http(_)))
    }
}

/// `http://host:port/` address of a ROS master.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MasterUri {
    host: String,
    port: u16,
}

impl MasterUri {
    pub fn new(host: impl Into<String>, port: u16) -> Result<Self, MasterError> {
        let host = host.into();
        if host.is_empty() || port == 0 || host.contains(['/', ' ']) {
            return Err(MasterError::InvalidUri(format!("http://{host}:{port}")));
        }
        Ok(MasterUri { host, port })
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.port
    }
}

impl FromStr for MasterUri {
    type Err = MasterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MasterError::InvalidUri(s.to_string());
        let rest = s.trim().strip_prefix("http://").ok_or_else(bad)?;
        let authority = match rest.split_once('/') {
            Some((a, "")) => a,
            Some(_) => return Err(bad()),
            None => rest,
        };
        let (host, port) = match authority.rsplit_once(':') {
            Some((h, p)) => {
                let port: u32 = p.parse().map_err(|_| bad())?;
                if !(1..=65535).contains(&port) {
                    return Err(bad());
                }
                (h, port as u16)
            }
            None => (authority, DEFAULT_MASTER_PORT),
        };
        MasterUri::new(host, port).map_err(|_| bad())
    }
}

impl fmt::Display for MasterUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "http://{}:{}/", self.host, self.port)
    }
}

impl Serialize for MasterUri {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        // Persisted without the trailing slash, as users type it.
        s.serialize_str(&format!("http://{}:{}", self.host, self.port))
    }
}

impl<'de> Deserialize<'de> for MasterUri {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Standard `[code, statusMessage, payload]` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcResult {
    pub code: i32,
    pub status_message: String,
    pub payload: Value,
}

impl RpcResult {
    pub fn ok(status: impl Into<String>, payload: impl Into<Value>) -> Self {
        RpcResult { code: 1, status_message: status.into(), payload: payload.into() }
    }

    pub fn failure(status: impl Into<String>, payload: impl Into<Value>) -> Self {
        RpcResult { code: 0, status_message: status.into(), payload: payload.into() }
    }

    pub fn error(status: impl Into<String>, payload: impl Into<Value>) -> Self {
        RpcResult { code: -1, status_message: status.into(), payload: payload.into() }
    }

    pub fn into_value(self) -> Value {
        Value::Array(vec![Value::Int(self.code), Value::String(self.status_message), self.payload])
    }

    pub fn from_value(v: Value) -> Result<Self, MasterError> {
        let Value::Array(mut items) = v else {
            return Err(MasterError::Malformed("result is not an array".into()));
        };
        if items.len() != 3 {
            return Err(MasterError::Malformed(format!("result has {} elements", items.len())));
        }
        let payload = items.pop().expect("len 3");
        let status_message = match items.pop() {
            Some(Value::String(s)) => s,
            _ => return Err(MasterError::Malformed("statusMessage is not a string".into())),
        };
        let code = match items.pop() {
            Some(Value::Int(c)) if (-1..=1).contains(&c) => c,
            other => return Err(MasterError::Malformed(format!("bad code {other:?}"))),
        };
        Ok(RpcResult { code, status_message, payload })
    }

    /// Payload of a successful call, or [`MasterError::Rejected`].
    pub fn into_payload(self) -> Result<Value, MasterError> {
        if self.code <= 0 {
            return Err(MasterError::Rejected { code: self.code, status: self.status_message });
        }
        Ok(self.payload)
    }
}

fn string_list(v: &Value) -> Result<Vec<String>, MasterError> {
    v.as_array()
        .ok_or_else(|| MasterError::Malformed("expected a list".into()))?
        .iter()
        .map(|s| {
            s.as_str()
                .map(str::to_string)
                .ok_or_else(|| MasterError::Malformed("expected a list of strings".into()))
        })
        .collect()
}

fn check_name(name: &str) -> Result<(), MasterError> {
    if name.starts_with('/') {
        Ok(())
    } else {
        Err(MasterError::InvalidName(name.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Publisher,
    Subscriber,
}

/// `getSystemState` payload: per topic, the node names in each role.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SystemState {
    pub publishers: Vec<(String, Vec<String>)>,
    pub subscribers: Vec<(String, Vec<String>)>,
    pub services: Vec<(String, Vec<String>)>,
}

impl SystemState {
    pub fn publishers_of(&self, topic: &str) -> Vec<String> {
        lookup(&self.publishers, topic)
    }

    pub fn subscribers_of(&self, topic: &str) -> Vec<String> {
        lookup(&self.subscribers, topic)
    }

    /// True if `node` appears anywhere in the state.
    pub fn mentions(&self, node: &str) -> bool {
        self.publishers
            .iter()
            .chain(&self.subscribers)
            .chain(&self.services)
            .any(|(_, nodes)| nodes.iter().any(|n| n == node))
    }
}

fn lookup(list: &[(String, Vec<String>)], topic: &str) -> Vec<String> {
    list.iter().find(|(t, _)| t == topic).map(|(_, n)| n.clone()).unwrap_or_default()
}

fn parse_topic_nodes(v: &Value) -> Result<Vec<(String, Vec<String>)>, MasterError> {
    v.as_array()
        .ok_or_else(|| MasterError::Malformed("system state entry is not a list".into()))?
        .iter()
        .map(|entry| match entry.as_array() {
            Some([Value::String(topic), nodes]) => Ok((topic.clone(), string_list(nodes)?)),
            _ => Err(MasterError::Malformed("bad [topic, [nodes]] entry".into())),
        })
        .collect()
}

/// XML-RPC client for the master API.
#[derive(Debug, Clone)]
pub struct MasterClient {
    uri: MasterUri,
    rpc: XmlRpcClient,
}

impl MasterClient {
    pub fn new(uri: MasterUri, timeout: Duration) -> Self {
        let rpc = XmlRpcClient::new(uri.to_string(), timeout);
        MasterClient { uri, rpc }
    }

    pub fn uri(&self) -> &MasterUri {
        &self.uri
    }

    fn call(&self, method: &str, params: Vec<Value>) -> Result<Value, MasterError> {
        let v = self.rpc.call(method, &params)?;
        RpcResult::from_value(v)?.into_payload()
    }

    /// Registers a publication; returns the slave URIs of current subscribers.
    pub fn register_publisher(
        &self,
        caller_id: &str,
        topic: &str,
        topic_type: &str,
        caller_api: &str,
    ) -> Result<Vec<String>, MasterError> {
        check_name(caller_id)?;
        check_name(topic)?;
        let v = self.call(
            "registerPublisher",
            vec![caller_id.into(), topic.into(), topic_type.into(), caller_api.into()],
        )?;
        string_list(&v)
    }

    /// Registers a subscription; returns the slave URIs of current publishers.
    pub fn register_subscriber(
        &self,
        caller_id: &str,
        topic: &str,
        topic_type: &str,
        caller_api: &str,
    ) -> Result<Vec<String>, MasterError> {
        check_name(caller_id)?;
        check_name(topic)?;
        let v = self.call(
            "registerSubscriber",
            vec![caller_id.into(), topic.into(), topic_type.into(), caller_api.into()],
        )?;
        string_list(&v)
    }

    /// Returns the number of registrations removed (0 or 1).
    pub fn unregister(
        &self,
        caller_id: &str,
        topic: &str,
        caller_api: &str,
        role: Role,
    ) -> Result<i32, MasterError> {
        let method = match role {
            Role::Publisher => "unregisterPublisher",
            Role::Subscriber => "unregisterSubscriber",
        };
        let v = self.call(method, vec![caller_id.into(), topic.into(), caller_api.into()])?;
        v.as_int().ok_or_else(|| MasterError::Malformed("unregister count is not an int".into()))
    }

    pub fn lookup_node(&self, caller_id: &str, node: &str) -> Result<String, MasterError> {
        let v = self.call("lookupNode", vec![caller_id.into(), node.into()])?;
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| MasterError::Malformed("node URI is not a string".into()))
    }

    pub fn get_system_state(&self, caller_id: &str) -> Result<SystemState, MasterError> {
        let v = self.call("getSystemState", vec![caller_id.into()])?;
        match v.as_array() {
            Some([p, s, srv]) => Ok(SystemState {
                publishers: parse_topic_nodes(p)?,
                subscribers: parse_topic_nodes(s)?,
                services: parse_topic_nodes(srv)?,
            }),
            _ => Err(MasterError::Malformed("system state is not [pubs, subs, srvs]".into())),
        }
    }

    pub fn get_topic_types(&self, caller_id: &str) -> Result<Vec<(String, String)>, MasterError> {
        let v = self.call("getTopicTypes", vec![caller_id.into()])?;
        v.as_array()
            .ok_or_else(|| MasterError::Malformed("topic types is not a list".into()))?
            .iter()
            .map(|e| match e.as_array() {
                Some([Value::String(t), Value::String(ty)]) => Ok((t.clone(), ty.clone())),
                _ => Err(MasterError::Malformed("bad [topic, type] entry".into())),
            })
            .collect()
    }

    pub fn get_pid(&self, caller_id: &str) -> Result<i32, MasterError> {
        let v = self.call("getPid", vec![caller_id.into()])?;
        v.as_int().ok_or_else(|| MasterError::Malformed("pid is not an int".into()))
    }
}

/// Asks a publisher's slave API for a TCPROS endpoint on `topic`.
pub fn request_topic(
    peer_slave_uri: &str,
    caller_id: &str,
    topic: &str,
    protocols: &[&str],
    timeout: Duration,
) -> Result<(String, u16), MasterError> {
    let rpc = XmlRpcClient::new(peer_slave_uri, timeout);
    let protos: Vec<Value> = protocols.iter().map(|p| Value::from(vec![*p])).collect();
    let v = rpc.call("requestTopic", &[caller_id.into(), topic.into(), Value::Array(protos)])?;
    let payload = RpcResult::from_value(v)?.into_payload()?;
    match payload.as_array() {
        Some([Value::String(proto), Value::String(host), Value::Int(port)]) if proto == TCPROS => {
            let port = u16::try_from(*port)
                .ok()
                .filter(|p| *p > 0)
                .ok_or_else(|| MasterError::Malformed(format!("bad port {port}")))?;
            Ok((host.clone(), port))
        }
        _ => Err(MasterError::Malformed(format!("unexpected protocol params {payload:?}"))),
    }
}

/// Callbacks behind this node's slave API.
///
/// Implementations must return quickly: queue the work and return.
pub trait SlaveHandler: Send + Sync + 'static {
    fn publisher_update(&self, caller_id: &str, topic: &str, publishers: Vec<String>);

    /// Returns the TCPROS `(host, port)` serving `topic`, or a failure message.
    fn request_topic(&self, caller_id: &str, topic: &str) -> Result<(String, u16), String>;
}

/// Running slave API server.
pub struct SlaveServer {
    rpc: RpcServer,
    uri: String,
}

impl SlaveServer {
    /// `http://host:port/` as advertised to the master and peers.
    pub fn uri(&self) -> &str {
        &self.uri
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.rpc.local_addr()
    }

    pub fn shutdown(&mut self) {
        self.rpc.shutdown();
    }
}

fn bad_args(method: &str) -> Value {
    RpcResult::error(format!("{method}: bad arguments"), 0).into_value()
}

fn dispatch_slave(handler: &dyn SlaveHandler, method: &str, params: &[Value]) -> Result<Value, Fault> {
    match method {
        "getPid" => Ok(RpcResult::ok("", std::process::id() as i32).into_value()),
        "publisherUpdate" => {
            let [Value::String(caller), Value::String(topic), pubs] = params else {
                return Ok(bad_args(method));
            };
            let Ok(pubs) = string_list(pubs) else {
                return Ok(bad_args(method));
            };
            handler.publisher_update(caller, topic, pubs);
            Ok(RpcResult::ok("publisher update received", 0).into_value())
        }
        "requestTopic" => {
            let [Value::String(caller), Value::String(topic), Value::Array(protocols)] = params
            else {
                return Ok(bad_args(method));
            };
            let tcpros = protocols.iter().any(|p| {
                p.as_array()
                    .and_then(|p| p.first())
                    .and_then(Value::as_str)
                    .is_some_and(|name| name == TCPROS)
            });
            if !tcpros {
                return Ok(RpcResult::failure("no supported protocol: only TCPROS is available", Value::Array(vec![])).into_value());
            }
            match handler.request_topic(caller, topic) {
                Ok((host, port)) => Ok(RpcResult::ok(
                    format!("ready on {host}:{port}"),
                    Value::Array(vec![TCPROS.into(), host.into(), Value::Int(i32::from(port))]),
                )
                .into_value()),
                Err(reason) => Ok(RpcResult::failure(reason, Value::Array(vec![])).into_value()),
            }
        }
        other => Err(Fault::new(-32601, format!("method `{other}` not supported"))),
    }
}

/// Starts the slave API on `bind`, advertising `advertise_host`.
pub fn serve_slave_api(
    bind: SocketAddr,
    advertise_host: &str,
    handler: Arc<dyn SlaveHandler>,
) -> Result<SlaveServer, MasterError> {
    let rpc_handler: RpcHandler =
        Arc::new(move |method: &str, params: &[Value]| dispatch_slave(handler.as_ref(), method, params));
    let rpc = RpcServer::bind(bind, rpc_handler).map_err(MasterError::Bind)?;
    let uri = format!("http://{}:{}/", advertise_host, rpc.local_addr().port());
    Ok(SlaveServer { rpc, uri })
}
