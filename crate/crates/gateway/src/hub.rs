//! Fan-out to dashboard clients through per-client bounded queues.
//!
//! Frames and logs are droppable (oldest first); status and error
//! messages never are.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use tokio::sync::Notify;

pub const DEFAULT_CLIENT_QUEUE: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub text: Arc<str>,
    pub droppable: bool,
}

pub struct ClientQueue {
    items: Mutex<VecDeque<Outgoing>>,
    notify: Notify,
    capacity: usize,
    closed: AtomicBool,
    dropped: AtomicU64,
}

impl ClientQueue {
    pub fn new(capacity: usize) -> Self {
        ClientQueue {
            items: Mutex::new(VecDeque::new()),
            notify: Notify::new(),
            capacity,
            closed: AtomicBool::new(false),
            dropped: AtomicU64::new(0),
        }
    }

    pub fn push(&self, m: Outgoing) {
        {
            let mut q = self.items.lock().unwrap();
            while q.len() >= self.capacity {
                match q.iter().position(|o| o.droppable) {
                    Some(i) => {
                        q.remove(i);
                        self.dropped.fetch_add(1, Ordering::Relaxed);
                    }
                    None => break,
                }
            }
            if q.len() >= self.capacity && m.droppable {
                self.dropped.fetch_add(1, Ordering::Relaxed);
                return;
            }
            q.push_back(m);
        }
        self.notify.notify_one();
    }

    pub fn try_pop(&self) -> Option<Outgoing> {
        self.items.lock().unwrap().pop_front()
    }

    /// Next message; `None` once closed.
    pub async fn pop(&self) -> Option<Outgoing> {
        loop {
            if self.closed.load(Ordering::SeqCst) {
                return None;
            }
            if let Some(m) = self.try_pop() {
                return Some(m);
            }
            self.notify.notified().await;
        }
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.notify.notify_one();
    }

    pub fn len(&self) -> usize {
        self.items.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

#[derive(Default)]
pub struct Hub {
    clients: Mutex<HashMap<u64, Arc<ClientQueue>>>,
    next_id: AtomicU64,
}

impl Hub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, capacity: usize) -> (u64, Arc<ClientQueue>) {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let q = Arc::new(ClientQueue::new(capacity));
        self.clients.lock().unwrap().insert(id, q.clone());
        (id, q)
    }

    pub fn unregister(&self, id: u64) {
        if let Some(q) = self.clients.lock().unwrap().remove(&id) {
            q.close();
        }
    }

    pub fn broadcast(&self, text: impl Into<Arc<str>>, droppable: bool) {
        let m = Outgoing { text: text.into(), droppable };
        for q in self.clients.lock().unwrap().values() {
            q.push(m.clone());
        }
    }

    pub fn client_count(&self) -> usize {
        self.clients.lock().unwrap().len()
    }
}
