//! Node runtime: ties the master API and TCPROS together.
//!
//! A [`NodeHandle`] owns a slave API server and a TCPROS listener. Each
//! subscription keeps at most one connection per publisher URI; incoming
//! frames go through a bounded drop-oldest queue to a single dispatcher
//! thread, so callbacks for one subscription never overlap.

use std::collections::{HashMap, VecDeque};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Condvar, Mutex, OnceLock, Weak};
use std::thread::{JoinHandle, ThreadId};
use std::time::Duration;

use thiserror::Error;

use crate::master_api::{
    self, serve_slave_api, MasterClient, MasterError, MasterUri, Role, SlaveHandler, SlaveServer,
};
use crate::msg::{self, MessageSchema, MsgError, RosMessage, Value};
use crate::tcpros::{self, ServedTopic, TcprosError};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Msg(#[from] MsgError),
    #[error(transparent)]
    Tcpros(#[from] TcprosError),
    #[error("{topic} is already {role} by this node")]
    Duplicate { topic: String, role: &'static str },
    #[error("published type {got} does not match the advertised {expected}")]
    WrongType { expected: &'static str, got: &'static str },
    #[error("invalid name `{0}`: must start with '/'")]
    InvalidName(String),
    #[error("node is shut down")]
    ShutDown,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct NodeOptions {
    pub name: String,
    pub master_uri: MasterUri,
    /// Host advertised in our URIs. Resolved from `ROS_HOSTNAME`/`ROS_IP` or
    /// the route to the master when unset.
    pub advertise_host: Option<String>,
    pub rpc_timeout: Duration,
    pub connect_attempts: u32,
    pub retry_delay: Duration,
    pub queue_capacity: usize,
    pub max_frame: usize,
}

impl NodeOptions {
    pub fn new(name: impl Into<String>, master_uri: MasterUri) -> Self {
        NodeOptions {
            name: name.into(),
            master_uri,
            advertise_host: None,
            rpc_timeout: master_api::DEFAULT_RPC_TIMEOUT,
            connect_attempts: 3,
            retry_delay: Duration::from_secs(1),
            queue_capacity: 64,
            max_frame: tcpros::DEFAULT_MAX_FRAME,
        }
    }

    pub fn advertise_host(mut self, host: impl Into<String>) -> Self {
        self.advertise_host = Some(host.into());
        self
    }

    pub fn rpc_timeout(mut self, t: Duration) -> Self {
        self.rpc_timeout = t;
        self
    }
}

/// A message as received, before decoding.
#[derive(Debug, Clone)]
pub struct RawMessage {
    /// Slave URI of the publisher it came from.
    pub publisher: String,
    pub bytes: Vec<u8>,
}

/// Bounded FIFO that drops its oldest entry when full.
pub struct DeliveryQueue<T> {
    state: Mutex<QueueState<T>>,
    cv: Condvar,
    capacity: usize,
}

struct QueueState<T> {
    items: VecDeque<T>,
    closed: bool,
    dropped: u64,
}

impl<T> DeliveryQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        DeliveryQueue {
            state: Mutex::new(QueueState { items: VecDeque::new(), closed: false, dropped: 0 }),
            cv: Condvar::new(),
            capacity,
        }
    }

    pub fn push(&self, item: T) {
        let mut s = self.state.lock().unwrap();
        if s.closed {
            return;
        }
        if s.items.len() == self.capacity {
            s.items.pop_front();
            s.dropped += 1;
        }
        s.items.push_back(item);
        self.cv.notify_one();
    }

    /// Blocks for the next item; `None` once closed.
    pub fn pop(&self) -> Option<T> {
        let mut s = self.state.lock().unwrap();
        loop {
            if s.closed {
                return None;
            }
            if let Some(item) = s.items.pop_front() {
                return Some(item);
            }
            s = self.cv.wait(s).unwrap();
        }
    }

    pub fn close(&self) {
        let mut s = self.state.lock().unwrap();
        s.closed = true;
        s.items.clear();
        self.cv.notify_all();
    }

    pub fn dropped(&self) -> u64 {
        self.state.lock().unwrap().dropped
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

struct PubConn {
    id: u64,
    peer: String,
    stream: TcpStream,
}

#[derive(Default)]
struct PubState {
    conns: Vec<PubConn>,
    latched_frame: Option<Vec<u8>>,
    closed: bool,
}

struct PubShared {
    topic: String,
    schema: &'static MessageSchema,
    latched: bool,
    state: Mutex<PubState>,
}

impl PubShared {
    fn publish_body(&self, body: &[u8]) -> usize {
        let frame = tcpros::encode_frame(body);
        let mut st = self.state.lock().unwrap();
        if st.closed {
            return 0;
        }
        st.conns.retain_mut(|c| match std::io::Write::write_all(&mut c.stream, &frame) {
            Ok(()) => true,
            Err(e) => {
                tracing::info!(topic = %self.topic, peer = %c.peer, "dropping subscriber: {e}");
                let _ = c.stream.shutdown(Shutdown::Both);
                false
            }
        });
        if self.latched {
            st.latched_frame = Some(frame);
        }
        st.conns.len()
    }

    fn add_subscriber(self: &Arc<Self>, mut stream: TcpStream, peer: String) {
        let id = next_id();
        let _ = stream.set_write_timeout(Some(Duration::from_secs(2)));
        let watch = stream.try_clone();
        {
            let mut st = self.state.lock().unwrap();
            if st.closed {
                let _ = stream.shutdown(Shutdown::Both);
                return;
            }
            if let Some(frame) = &st.latched_frame {
                if let Err(e) = std::io::Write::write_all(&mut stream, frame) {
                    tracing::info!(topic = %self.topic, "latched replay failed: {e}");
                    return;
                }
            }
            st.conns.push(PubConn { id, peer, stream });
        }
        // Subscribers never send after the header; EOF means they left.
        if let Ok(mut watch) = watch {
            let me = Arc::downgrade(self);
            let _ = std::thread::Builder::new().name("tcpros-pub-watch".into()).spawn(move || {
                let mut sink = [0u8; 256];
                while matches!(std::io::Read::read(&mut watch, &mut sink), Ok(n) if n > 0) {}
                if let Some(me) = me.upgrade() {
                    me.state.lock().unwrap().conns.retain(|c| c.id != id);
                }
            });
        }
    }

    fn close(&self) {
        let mut st = self.state.lock().unwrap();
        st.closed = true;
        for c in st.conns.drain(..) {
            let _ = c.stream.shutdown(Shutdown::Both);
        }
    }
}

/// Handle to an advertised topic.
#[derive(Clone)]
pub struct Publication {
    shared: Arc<PubShared>,
}

impl std::fmt::Debug for Publication {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Publication")
            .field("topic", &self.shared.topic)
            .field("type", &self.shared.schema.type_name)
            .finish()
    }
}

impl Publication {
    pub fn topic(&self) -> &str {
        &self.shared.topic
    }

    pub fn schema(&self) -> &'static MessageSchema {
        self.shared.schema
    }

    pub fn num_subscribers(&self) -> usize {
        self.shared.state.lock().unwrap().conns.len()
    }

    /// Serializes and writes `value` to every connected subscriber.
    /// Returns how many connections took the frame.
    pub fn publish_value(&self, value: &Value) -> Result<usize, NodeError> {
        msg::check_finite(value)?;
        let body = msg::serialize_message(value, self.shared.schema)?;
        Ok(self.shared.publish_body(&body))
    }

    pub fn publish<M: RosMessage>(&self, message: &M) -> Result<usize, NodeError> {
        if M::TYPE_NAME != self.shared.schema.type_name {
            return Err(NodeError::WrongType {
                expected: self.shared.schema.type_name,
                got: M::TYPE_NAME,
            });
        }
        self.publish_value(&message.to_value())
    }
}

type Callback = Box<dyn FnMut(RawMessage) + Send>;

struct ConnSlot {
    id: u64,
    stream: Option<TcpStream>,
}

struct SubShared {
    topic: String,
    schema: &'static MessageSchema,
    conns: Mutex<HashMap<String, ConnSlot>>,
    queue: DeliveryQueue<RawMessage>,
    active: AtomicBool,
    callback: Mutex<Callback>,
    dispatcher: OnceLock<ThreadId>,
}

impl SubShared {
    fn slot_is(&self, uri: &str, id: u64) -> bool {
        self.conns.lock().unwrap().get(uri).is_some_and(|s| s.id == id)
    }

    fn remove_slot(&self, uri: &str, id: u64) {
        let mut conns = self.conns.lock().unwrap();
        if conns.get(uri).is_some_and(|s| s.id == id) {
            conns.remove(uri);
        }
    }

    fn deactivate(&self) {
        self.active.store(false, Ordering::SeqCst);
        self.queue.close();
        for (_, slot) in self.conns.lock().unwrap().drain() {
            if let Some(s) = slot.stream {
                let _ = s.shutdown(Shutdown::Both);
            }
        }
        // Wait out an in-flight callback unless we are that callback.
        if self.dispatcher.get() != Some(&std::thread::current().id()) {
            drop(self.callback.lock().unwrap());
        }
    }

    fn dispatch_loop(&self) {
        while let Some(m) = self.queue.pop() {
            let mut cb = self.callback.lock().unwrap();
            if !self.active.load(Ordering::SeqCst) {
                break;
            }
            cb(m);
        }
    }
}

/// Handle to an active subscription.
#[derive(Clone)]
pub struct Subscription {
    shared: Arc<SubShared>,
}

impl std::fmt::Debug for Subscription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subscription").field("topic", &self.shared.topic).finish()
    }
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.shared.topic
    }

    /// Slave URIs of publishers we hold (or are establishing) a connection to.
    pub fn publishers(&self) -> Vec<String> {
        let mut v: Vec<String> = self.shared.conns.lock().unwrap().keys().cloned().collect();
        v.sort();
        v
    }

    /// Publishers with an established TCPROS stream.
    pub fn connected_publishers(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .shared
            .conns
            .lock()
            .unwrap()
            .iter()
            .filter(|(_, s)| s.stream.is_some())
            .map(|(k, _)| k.clone())
            .collect();
        v.sort();
        v
    }

    pub fn is_active(&self) -> bool {
        self.shared.active.load(Ordering::SeqCst)
    }

    pub fn dropped_messages(&self) -> u64 {
        self.shared.queue.dropped()
    }
}

struct SlaveBridge {
    node: OnceLock<Weak<NodeInner>>,
    updates: Mutex<mpsc::Sender<(String, Vec<String>)>>,
}

impl SlaveHandler for SlaveBridge {
    fn publisher_update(&self, _caller_id: &str, topic: &str, publishers: Vec<String>) {
        let _ = self.updates.lock().unwrap().send((topic.to_string(), publishers));
    }

    fn request_topic(&self, _caller_id: &str, topic: &str) -> Result<(String, u16), String> {
        let node = self.node.get().and_then(Weak::upgrade).ok_or("node is shutting down")?;
        if node.publications.lock().unwrap().contains_key(topic) {
            Ok((node.host.clone(), node.tcpros_addr.port()))
        } else {
            Err(format!("topic {topic} not published by {}", node.name))
        }
    }
}

struct NodeInner {
    name: String,
    opts: NodeOptions,
    master: MasterClient,
    host: String,
    slave_uri: String,
    slave: Mutex<Option<SlaveServer>>,
    tcpros_addr: SocketAddr,
    publications: Mutex<HashMap<String, Arc<PubShared>>>,
    subscriptions: Mutex<HashMap<String, Arc<SubShared>>>,
    shut: AtomicBool,
    listener_thread: Mutex<Option<JoinHandle<()>>>,
}

/// Shareable handle to a running node.
#[derive(Clone)]
pub struct NodeHandle {
    inner: Arc<NodeInner>,
}

impl std::fmt::Debug for NodeHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeHandle")
            .field("name", &self.inner.name)
            .field("slave_uri", &self.inner.slave_uri)
            .finish()
    }
}

fn resolve_host(opts: &NodeOptions) -> String {
    if let Some(h) = &opts.advertise_host {
        return h.clone();
    }
    for var in ["ROS_HOSTNAME", "ROS_IP"] {
        if let Ok(v) = std::env::var(var) {
            if !v.is_empty() {
                return v;
            }
        }
    }
    // Local address of the route toward the master.
    let route = (|| {
        let target = (opts.master_uri.host(), opts.master_uri.port()).to_socket_addrs().ok()?.next()?;
        let sock = UdpSocket::bind(if target.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }).ok()?;
        sock.connect(target).ok()?;
        sock.local_addr().ok().map(|a| a.ip().to_string())
    })();
    route.unwrap_or_else(|| "127.0.0.1".to_string())
}

impl NodeHandle {
    /// Starts the slave API and TCPROS listener. Does not contact the master.
    pub fn new(opts: NodeOptions) -> Result<NodeHandle, NodeError> {
        if !opts.name.starts_with('/') {
            return Err(NodeError::InvalidName(opts.name.clone()));
        }
        let host = resolve_host(&opts);
        let listener = TcpListener::bind("0.0.0.0:0")?;
        let tcpros_addr = listener.local_addr()?;
        let (tx, rx) = mpsc::channel();
        let bridge = Arc::new(SlaveBridge { node: OnceLock::new(), updates: Mutex::new(tx) });
        let slave = serve_slave_api("0.0.0.0:0".parse().expect("static addr"), &host, bridge.clone())?;
        let inner = Arc::new(NodeInner {
            name: opts.name.clone(),
            master: MasterClient::new(opts.master_uri.clone(), opts.rpc_timeout),
            host,
            slave_uri: slave.uri().to_string(),
            slave: Mutex::new(Some(slave)),
            tcpros_addr,
            publications: Mutex::new(HashMap::new()),
            subscriptions: Mutex::new(HashMap::new()),
            shut: AtomicBool::new(false),
            listener_thread: Mutex::new(None),
            opts,
        });
        let _ = bridge.node.set(Arc::downgrade(&inner));

        let weak = Arc::downgrade(&inner);
        std::thread::Builder::new()
            .name("node-updates".into())
            .spawn(move || {
                for (topic, uris) in rx {
                    match weak.upgrade() {
                        Some(node) => node.handle_publisher_update(&topic, uris),
                        None => break,
                    }
                }
            })?;

        let weak = Arc::downgrade(&inner);
        let t = std::thread::Builder::new()
            .name("tcpros-listen".into())
            .spawn(move || accept_loop(listener, weak))?;
        *inner.listener_thread.lock().unwrap() = Some(t);
        Ok(NodeHandle { inner })
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn slave_uri(&self) -> &str {
        &self.inner.slave_uri
    }

    pub fn tcpros_port(&self) -> u16 {
        self.inner.tcpros_addr.port()
    }

    pub fn master(&self) -> &MasterClient {
        &self.inner.master
    }

    pub fn is_shut_down(&self) -> bool {
        self.inner.shut.load(Ordering::SeqCst)
    }

    /// Registers a publication with the master and starts accepting subscribers.
    pub fn advertise(&self, topic: &str, type_name: &str, latched: bool) -> Result<Publication, NodeError> {
        let node = &self.inner;
        if node.shut.load(Ordering::SeqCst) {
            return Err(NodeError::ShutDown);
        }
        if !topic.starts_with('/') {
            return Err(NodeError::InvalidName(topic.to_string()));
        }
        let schema = msg::schema(type_name)?;
        let shared = Arc::new(PubShared {
            topic: topic.to_string(),
            schema,
            latched,
            state: Mutex::new(PubState::default()),
        });
        {
            let mut pubs = node.publications.lock().unwrap();
            if pubs.contains_key(topic) {
                return Err(NodeError::Duplicate { topic: topic.into(), role: "advertised" });
            }
            pubs.insert(topic.to_string(), shared.clone());
        }
        if let Err(e) = node.master.register_publisher(&node.name, topic, type_name, &node.slave_uri) {
            node.publications.lock().unwrap().remove(topic);
            return Err(e.into());
        }
        Ok(Publication { shared })
    }

    pub fn advertise_typed<M: RosMessage>(&self, topic: &str, latched: bool) -> Result<Publication, NodeError> {
        self.advertise(topic, M::TYPE_NAME, latched)
    }

    /// Subscribes with a raw-bytes callback. Callbacks for one subscription
    /// are serialized and follow per-connection arrival order.
    pub fn subscribe_raw<F>(&self, topic: &str, type_name: &str, callback: F) -> Result<Subscription, NodeError>
    where
        F: FnMut(RawMessage) + Send + 'static,
    {
        let node = &self.inner;
        if node.shut.load(Ordering::SeqCst) {
            return Err(NodeError::ShutDown);
        }
        if !topic.starts_with('/') {
            return Err(NodeError::InvalidName(topic.to_string()));
        }
        let schema = msg::schema(type_name)?;
        let shared = Arc::new(SubShared {
            topic: topic.to_string(),
            schema,
            conns: Mutex::new(HashMap::new()),
            queue: DeliveryQueue::new(node.opts.queue_capacity),
            active: AtomicBool::new(true),
            callback: Mutex::new(Box::new(callback)),
            dispatcher: OnceLock::new(),
        });
        {
            let mut subs = node.subscriptions.lock().unwrap();
            if subs.contains_key(topic) {
                return Err(NodeError::Duplicate { topic: topic.into(), role: "subscribed" });
            }
            subs.insert(topic.to_string(), shared.clone());
        }
        let dispatcher = {
            let shared = shared.clone();
            std::thread::Builder::new()
                .name(format!("sub-{topic}"))
                .spawn(move || shared.dispatch_loop())?
        };
        let _ = shared.dispatcher.set(dispatcher.thread().id());
        match node.master.register_subscriber(&node.name, topic, type_name, &node.slave_uri) {
            Ok(publishers) => {
                node.handle_publisher_update(topic, publishers);
                Ok(Subscription { shared })
            }
            Err(e) => {
                node.subscriptions.lock().unwrap().remove(topic);
                shared.deactivate();
                Err(e.into())
            }
        }
    }

    /// Typed subscription; undecodable messages are logged and skipped.
    pub fn subscribe<M, F>(&self, topic: &str, mut callback: F) -> Result<Subscription, NodeError>
    where
        M: RosMessage,
        F: FnMut(M) + Send + 'static,
    {
        let t = topic.to_string();
        self.subscribe_raw(topic, M::TYPE_NAME, move |raw| match M::decode(&raw.bytes) {
            Ok(m) => callback(m),
            Err(e) => tracing::warn!(topic = %t, publisher = %raw.publisher, "undecodable message: {e}"),
        })
    }

    /// Applies a publisher list pushed by the master.
    pub fn handle_publisher_update(&self, topic: &str, uris: Vec<String>) {
        self.inner.handle_publisher_update(topic, uris)
    }

    pub fn unadvertise(&self, topic: &str) -> Result<(), NodeError> {
        self.inner.unadvertise(topic)
    }

    /// Removes the subscription. Once this returns its callback never runs again.
    pub fn unsubscribe(&self, topic: &str) -> Result<(), NodeError> {
        self.inner.unsubscribe(topic)
    }

    /// Unregisters everything, closes sockets and stops servers. Idempotent.
    pub fn shutdown(&self) {
        self.inner.shutdown();
    }
}

impl NodeInner {
    fn handle_publisher_update(self: &Arc<Self>, topic: &str, uris: Vec<String>) {
        let Some(sub) = self.subscriptions.lock().unwrap().get(topic).cloned() else {
            tracing::debug!(topic, "publisherUpdate for a topic we do not subscribe");
            return;
        };
        if !sub.active.load(Ordering::SeqCst) {
            return;
        }
        let mut conns = sub.conns.lock().unwrap();
        conns.retain(|uri, slot| {
            let keep = uris.contains(uri);
            if !keep {
                if let Some(s) = &slot.stream {
                    let _ = s.shutdown(Shutdown::Both);
                }
            }
            keep
        });
        for uri in uris {
            if conns.contains_key(&uri) {
                continue;
            }
            let id = next_id();
            conns.insert(uri.clone(), ConnSlot { id, stream: None });
            let node = Arc::downgrade(self);
            let sub = sub.clone();
            let spawned = std::thread::Builder::new()
                .name(format!("tcpros-sub-{}", sub.topic))
                .spawn(move || run_publisher_link(node, sub, uri, id));
            if let Err(e) = spawned {
                tracing::error!("cannot spawn connection thread: {e}");
            }
        }
    }

    fn unadvertise(&self, topic: &str) -> Result<(), NodeError> {
        let Some(p) = self.publications.lock().unwrap().remove(topic) else {
            return Ok(());
        };
        p.close();
        self.master.unregister(&self.name, topic, &self.slave_uri, Role::Publisher)?;
        Ok(())
    }

    fn unsubscribe(&self, topic: &str) -> Result<(), NodeError> {
        let Some(s) = self.subscriptions.lock().unwrap().remove(topic) else {
            return Ok(());
        };
        s.deactivate();
        self.master.unregister(&self.name, topic, &self.slave_uri, Role::Subscriber)?;
        Ok(())
    }

    fn shutdown(&self) {
        if self.shut.swap(true, Ordering::SeqCst) {
            return;
        }
        let pubs: Vec<String> = self.publications.lock().unwrap().keys().cloned().collect();
        for topic in pubs {
            if let Err(e) = self.unadvertise(&topic) {
                tracing::warn!(%topic, "unregisterPublisher failed: {e}");
            }
        }
        let subs: Vec<String> = self.subscriptions.lock().unwrap().keys().cloned().collect();
        for topic in subs {
            if let Err(e) = self.unsubscribe(&topic) {
                tracing::warn!(%topic, "unregisterSubscriber failed: {e}");
            }
        }
        if let Some(mut s) = self.slave.lock().unwrap().take() {
            s.shutdown();
        }
        // Wake the accept loop so it observes the flag.
        let _ = TcpStream::connect_timeout(
            &SocketAddr::from(([127, 0, 0, 1], self.tcpros_addr.port())),
            Duration::from_millis(200),
        );
        if let Some(t) = self.listener_thread.lock().unwrap().take() {
            if t.thread().id() != std::thread::current().id() {
                let _ = t.join();
            }
        }
    }
}

impl Drop for NodeInner {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, node: Weak<NodeInner>) {
    for stream in listener.incoming() {
        let Some(n) = node.upgrade() else { break };
        if n.shut.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                tracing::warn!("accept failed: {e}");
                continue;
            }
        };
        let weak = node.clone();
        drop(n);
        let _ = std::thread::Builder::new()
            .name("tcpros-accept".into())
            .spawn(move || accept_subscriber(stream, weak));
    }
}

fn accept_subscriber(mut stream: TcpStream, node: Weak<NodeInner>) {
    let Some(n) = node.upgrade() else { return };
    let name = n.name.clone();
    let mut found: Option<Arc<PubShared>> = None;
    let result = tcpros::publisher_handshake(&mut stream, &name, |topic| {
        let p = n.publications.lock().unwrap().get(topic).cloned()?;
        let served = ServedTopic { schema: p.schema, latched: p.latched };
        found = Some(p);
        Some(served)
    });
    match result {
        Ok(accepted) => {
            if let Some(p) = found {
                tracing::debug!(topic = %accepted.topic, peer = %accepted.peer_callerid, "subscriber connected");
                p.add_subscriber(stream, accepted.peer_callerid);
            }
        }
        Err(e) => tracing::info!("rejected inbound subscriber: {e}"),
    }
}

fn connect_once(node: &NodeInner, sub: &SubShared, uri: &str) -> Result<TcpStream, NodeError> {
    let timeout = node.opts.rpc_timeout;
    let (host, port) = master_api::request_topic(uri, &node.name, &sub.topic, &[master_api::TCPROS], timeout)?;
    let addr = (host.as_str(), port)
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::other(format!("cannot resolve {host}")))?;
    let mut stream = TcpStream::connect_timeout(&addr, timeout)?;
    tcpros::subscriber_handshake(&mut stream, &sub.topic, sub.schema, &node.name, timeout)?;
    Ok(stream)
}

fn run_publisher_link(node: Weak<NodeInner>, sub: Arc<SubShared>, uri: String, id: u64) {
    let (attempts, delay, max_frame) = match node.upgrade() {
        Some(n) => (n.opts.connect_attempts.max(1), n.opts.retry_delay, n.opts.max_frame),
        None => return,
    };
    let mut stream = None;
    for attempt in 1..=attempts {
        if !sub.active.load(Ordering::SeqCst) || !sub.slot_is(&uri, id) {
            return;
        }
        let Some(n) = node.upgrade() else { return };
        match connect_once(&n, &sub, &uri) {
            Ok(s) => {
                stream = Some(s);
                break;
            }
            Err(e) => {
                tracing::warn!(topic = %sub.topic, %uri, attempt, "publisher connect failed: {e}");
            }
        }
        drop(n);
        if attempt < attempts {
            std::thread::sleep(delay);
        }
    }
    let Some(mut stream) = stream else {
        sub.remove_slot(&uri, id);
        return;
    };
    {
        let mut conns = sub.conns.lock().unwrap();
        match (conns.get_mut(&uri), stream.try_clone()) {
            (Some(slot), Ok(clone)) if slot.id == id => slot.stream = Some(clone),
            _ => {
                let _ = stream.shutdown(Shutdown::Both);
                return;
            }
        }
    }
    loop {
        match tcpros::read_frame(&mut stream, max_frame) {
            Ok(Some(bytes)) => sub.queue.push(RawMessage { publisher: uri.clone(), bytes }),
            Ok(None) => break,
            Err(e) => {
                if sub.active.load(Ordering::SeqCst) {
                    tracing::info!(topic = %sub.topic, %uri, "connection lost: {e}");
                }
                break;
            }
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
    sub.remove_slot(&uri, id);
}
