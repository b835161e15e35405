//! Joystick teleoperation: sample mapping and the fixed-rate publish session.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rosdeck_core::msg::Twist;
use rosdeck_core::node::Publication;
use serde::{Deserialize, Serialize};

pub const DEADMAN: Duration = Duration::from_millis(500);

/// Pad-relative stick position in screen convention: x right, y down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JoystickSample {
    pub x: f64,
    pub y: f64,
    pub engaged: bool,
}

impl JoystickSample {
    pub fn new(x: f64, y: f64, engaged: bool) -> Self {
        JoystickSample { x, y, engaged }
    }

    pub fn release() -> Self {
        JoystickSample { x: 0.0, y: 0.0, engaged: false }
    }

    /// Radially clamped to the unit disc; non-finite axes read as zero.
    pub fn clamped(self) -> Self {
        let fin = |v: f64| if v.is_finite() { v } else { 0.0 };
        let (x, y) = (fin(self.x), fin(self.y));
        let r = x.hypot(y);
        if r > 1.0 {
            JoystickSample { x: x / r, y: y / r, ..self }
        } else {
            JoystickSample { x, y, ..self }
        }
    }
}

/// Push up drives forward; push right turns clockwise.
pub fn joystick_to_twist(s: JoystickSample, max_linear: f64, max_angular: f64) -> Twist {
    let s = s.clamped();
    let zero_safe = |v: f64| if v == 0.0 { 0.0 } else { v };
    Twist::planar(zero_safe(-s.y * max_linear), zero_safe(-s.x * max_angular))
}

/// Publish-latest-at-fixed-rate state machine, driven by explicit instants.
#[derive(Debug, Clone)]
pub struct TeleopSession {
    max_linear: f64,
    max_angular: f64,
    period: Duration,
    deadman: Duration,
    engaged: bool,
    latest: JoystickSample,
    last_sample_at: Option<Instant>,
    next_publish: Option<Instant>,
}

impl TeleopSession {
    pub fn new(max_linear: f64, max_angular: f64, publish_rate_hz: f64) -> Self {
        TeleopSession {
            max_linear,
            max_angular,
            period: Duration::from_secs_f64(1.0 / publish_rate_hz),
            deadman: DEADMAN,
            engaged: false,
            latest: JoystickSample::release(),
            last_sample_at: None,
            next_publish: None,
        }
    }

    pub fn is_engaged(&self) -> bool {
        self.engaged
    }

    pub fn last_sample_at(&self) -> Option<Instant> {
        self.last_sample_at
    }

    fn twist(&self) -> Twist {
        joystick_to_twist(self.latest, self.max_linear, self.max_angular)
    }

    /// Feeds one sample. Engaging publishes at once; releasing an engaged
    /// session publishes the single zero.
    pub fn on_sample(&mut self, s: JoystickSample, now: Instant) -> Option<Twist> {
        self.last_sample_at = Some(now);
        if s.engaged {
            self.latest = s.clamped();
            if !self.engaged {
                self.engaged = true;
                self.next_publish = Some(now + self.period);
                return Some(self.twist());
            }
            None
        } else {
            self.latest = JoystickSample::release();
            self.disengage()
        }
    }

    fn disengage(&mut self) -> Option<Twist> {
        if !self.engaged {
            return None;
        }
        self.engaged = false;
        self.next_publish = None;
        Some(Twist::ZERO)
    }

    /// Rate ticks and the deadman. Call at or after [`Self::next_deadline`].
    pub fn poll(&mut self, now: Instant) -> Option<Twist> {
        if !self.engaged {
            return None;
        }
        if self.last_sample_at.is_some_and(|t| now.duration_since(t) >= self.deadman) {
            return self.disengage();
        }
        let due = self.next_publish?;
        if now < due {
            return None;
        }
        let next = due + self.period;
        self.next_publish = Some(if next <= now { now + self.period } else { next });
        Some(self.twist())
    }

    /// Stops the session (e.g. on disconnect); a zero if it was engaged.
    pub fn stop(&mut self) -> Option<Twist> {
        self.disengage()
    }

    pub fn next_deadline(&self) -> Option<Instant> {
        if !self.engaged {
            return None;
        }
        let dead = self.last_sample_at.map(|t| t + self.deadman);
        match (self.next_publish, dead) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

enum Cmd {
    Sample(JoystickSample),
    Stop,
}

/// A [`TeleopSession`] running on its own thread against a publication.
pub struct TeleopWorker {
    tx: mpsc::Sender<Cmd>,
    thread: Option<JoinHandle<()>>,
    publication: Publication,
}

fn publish(p: &Publication, t: &Twist) {
    if let Err(e) = p.publish(t) {
        tracing::warn!(topic = p.topic(), "teleop publish failed: {e}");
    }
}

impl TeleopWorker {
    pub fn spawn(mut session: TeleopSession, publication: Publication) -> std::io::Result<TeleopWorker> {
        let (tx, rx) = mpsc::channel();
        let handle = publication.clone();
        let thread = std::thread::Builder::new().name(format!("teleop-{}", publication.topic())).spawn(move || {
            loop {
                let wait = session
                    .next_deadline()
                    .map(|d| d.saturating_duration_since(Instant::now()))
                    .unwrap_or(Duration::from_secs(3600));
                match rx.recv_timeout(wait) {
                    Ok(Cmd::Sample(s)) => {
                        if let Some(t) = session.on_sample(s, Instant::now()) {
                            publish(&publication, &t);
                        }
                    }
                    Ok(Cmd::Stop) | Err(RecvTimeoutError::Disconnected) => {
                        if let Some(t) = session.stop() {
                            publish(&publication, &t);
                        }
                        return;
                    }
                    Err(RecvTimeoutError::Timeout) => {}
                }
                if let Some(t) = session.poll(Instant::now()) {
                    publish(&publication, &t);
                }
            }
        })?;
        Ok(TeleopWorker { tx, thread: Some(thread), publication: handle })
    }

    pub fn send(&self, s: JoystickSample) {
        let _ = self.tx.send(Cmd::Sample(s));
    }

    pub fn num_subscribers(&self) -> usize {
        self.publication.num_subscribers()
    }

    /// Publishes the final zero if engaged and waits for the thread.
    pub fn stop(&mut self) {
        let _ = self.tx.send(Cmd::Stop);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for TeleopWorker {
    fn drop(&mut self) {
        self.stop();
    }
}
