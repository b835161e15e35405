//! The simulated robot node: `/cmd_vel` in; `/odom`, `/map` and `/rosout` out.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rosdeck_core::master_api::MasterUri;
use rosdeck_core::msg::{
    Header, Log, LogLevel, OccupancyGrid, Odometry, Point, Pose, PoseWithCovariance, Quaternion, RosMessage, RosTime,
    Twist, TwistWithCovariance,
};
use rosdeck_core::node::{NodeError, NodeHandle, NodeOptions, Publication};
use rosdeck_core::Pose2d;

use crate::floorplan::Floorplan;
use crate::mapper::{KnownMap, DEFAULT_SENSOR_RADIUS};
use crate::tour::{self, TourStep};
use crate::world::{World, DEFAULT_CMD_TIMEOUT};

pub const DEFAULT_NODE_NAME: &str = "/sim_robot";
const CMD_LOG_CAP: usize = 10_000;

#[derive(Debug, Clone)]
pub struct RobotOptions {
    pub name: String,
    pub master_uri: MasterUri,
    pub spawn: Pose2d,
    pub rate_hz: f64,
    pub odom_every: u32,
    pub cmd_timeout: f64,
    pub sensor_radius: f64,
    /// Host advertised in our URIs; resolved automatically when unset.
    pub advertise_host: Option<String>,
}

impl RobotOptions {
    pub fn new(master_uri: MasterUri, spawn: Pose2d) -> Self {
        RobotOptions {
            name: DEFAULT_NODE_NAME.into(),
            master_uri,
            spawn,
            rate_hz: 50.0,
            odom_every: 5,
            cmd_timeout: DEFAULT_CMD_TIMEOUT,
            sensor_radius: DEFAULT_SENSOR_RADIUS,
            advertise_host: None,
        }
    }
}

struct State {
    world: World,
    cmd_log: VecDeque<(f64, Twist)>,
    map_seq: u32,
    first_cmd_logged: bool,
}

struct Shared {
    start: Instant,
    spawn: Pose2d,
    state: Mutex<State>,
    stop: AtomicBool,
    load_time: RosTime,
}

impl Shared {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

struct Pubs {
    odom: Publication,
    map: Publication,
    rosout: Publication,
}

/// A running robot node.
pub struct RobotNode {
    node: NodeHandle,
    shared: Arc<Shared>,
    pubs: Arc<Pubs>,
    ticker: Option<JoinHandle<()>>,
}

fn log_msg(name: &str, seq: u32, level: LogLevel, text: String) -> Log {
    Log {
        header: Header { seq, stamp: RosTime::now(), frame_id: String::new() },
        level: level as u8,
        name: name.to_string(),
        msg: text,
        file: "robot.rs".into(),
        function: "run".into(),
        line: 0,
        topics: vec!["/cmd_vel".into(), "/odom".into(), "/map".into(), "/rosout".into()],
    }
}

fn odom_msg(seq: u32, spawn: Pose2d, pose: Pose2d, cmd: Twist) -> Odometry {
    // Odometry is reported in the spawn frame, so it starts at the origin.
    let (dx, dy) = (pose.x - spawn.x, pose.y - spawn.y);
    let (s, c) = spawn.theta.sin_cos();
    let theta = rosdeck_core::wrap_angle(pose.theta - spawn.theta);
    Odometry {
        header: Header { seq, stamp: RosTime::now(), frame_id: "odom".into() },
        child_frame_id: "base_link".into(),
        pose: PoseWithCovariance {
            pose: Pose {
                position: Point { x: c * dx + s * dy, y: -s * dx + c * dy, z: 0.0 },
                orientation: Quaternion::from_yaw(theta),
            },
            covariance: [0.0; 36],
        },
        twist: TwistWithCovariance { twist: Twist::planar(cmd.linear.x, cmd.angular.z), covariance: [0.0; 36] },
    }
}

fn publish_logged<M: RosMessage>(p: &Publication, m: &M) {
    if let Err(e) = p.publish(m) {
        tracing::warn!(topic = p.topic(), "publish failed: {e}");
    }
}

impl RobotNode {
    /// Registers with the master, retrying until it answers or `give_up` passes.
    pub fn start(plan: Floorplan, opts: RobotOptions, give_up: Duration) -> Result<RobotNode, NodeError> {
        let deadline = Instant::now() + give_up;
        loop {
            match Self::try_start(plan.clone(), opts.clone()) {
                Ok(r) => return Ok(r),
                Err(NodeError::Master(e)) if e.is_transport() && Instant::now() < deadline => {
                    tracing::warn!("master not reachable, retrying: {e}");
                    std::thread::sleep(Duration::from_millis(500));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn try_start(plan: Floorplan, opts: RobotOptions) -> Result<RobotNode, NodeError> {
        let mut nopts = NodeOptions::new(opts.name.clone(), opts.master_uri.clone());
        nopts.advertise_host = opts.advertise_host.clone();
        let node = NodeHandle::new(nopts)?;
        let mut world = World::new(plan, opts.spawn, opts.sensor_radius);
        world.cmd_timeout = opts.cmd_timeout;
        let shared = Arc::new(Shared {
            start: Instant::now(),
            spawn: opts.spawn,
            state: Mutex::new(State { world, cmd_log: VecDeque::new(), map_seq: 0, first_cmd_logged: false }),
            stop: AtomicBool::new(false),
            load_time: RosTime::now(),
        });
        let pubs = Arc::new(Pubs {
            odom: node.advertise_typed::<Odometry>("/odom", false)?,
            map: node.advertise_typed::<OccupancyGrid>("/map", true)?,
            rosout: node.advertise_typed::<Log>("/rosout", true)?,
        });
        {
            let shared = shared.clone();
            let pubs = pubs.clone();
            let name = opts.name.clone();
            node.subscribe::<Twist, _>("/cmd_vel", move |cmd| {
                let t = shared.now();
                let mut st = shared.state.lock().unwrap();
                st.world.command(t, cmd);
                if st.cmd_log.len() == CMD_LOG_CAP {
                    st.cmd_log.pop_front();
                }
                st.cmd_log.push_back((t, cmd));
                if !st.first_cmd_logged {
                    st.first_cmd_logged = true;
                    drop(st);
                    let text = format!("first command: v={} w={}", cmd.linear.x, cmd.angular.z);
                    publish_logged(&pubs.rosout, &log_msg(&name, 1, LogLevel::Info, text));
                }
            })?;
        }
        let spawn = opts.spawn;
        publish_logged(
            &pubs.rosout,
            &log_msg(&opts.name, 0, LogLevel::Info, format!("sim robot started at x={:.2} y={:.2}", spawn.x, spawn.y)),
        );
        let ticker = {
            let shared = shared.clone();
            let pubs = pubs.clone();
            let period = Duration::from_secs_f64(1.0 / opts.rate_hz);
            let odom_every = opts.odom_every.max(1);
            std::thread::Builder::new()
                .name("sim-robot-tick".into())
                .spawn(move || tick_loop(&shared, &pubs, period, odom_every))?
        };
        Ok(RobotNode { node, shared, pubs, ticker: Some(ticker) })
    }

    pub fn node(&self) -> &NodeHandle {
        &self.node
    }

    pub fn pose(&self) -> Pose2d {
        self.shared.state.lock().unwrap().world.robot.pose
    }

    /// Pose in the odometry frame (relative to spawn).
    pub fn odom_pose(&self) -> Pose2d {
        let p = self.pose();
        let o = odom_msg(0, self.shared.spawn, p, Twist::ZERO);
        Pose2d::new(o.pose.pose.position.x, o.pose.pose.position.y, o.pose.pose.orientation.yaw())
    }

    pub fn known_map(&self) -> KnownMap {
        self.shared.state.lock().unwrap().world.known.clone()
    }

    /// The robot's grid exactly as last published on `/map`.
    pub fn map_message(&self) -> OccupancyGrid {
        let st = self.shared.state.lock().unwrap();
        st.world.known.to_grid(st.map_seq, RosTime::now(), self.shared.load_time)
    }

    /// Commands received on `/cmd_vel`, with their arrival sim time.
    pub fn received_commands(&self) -> Vec<(f64, Twist)> {
        self.shared.state.lock().unwrap().cmd_log.iter().copied().collect()
    }

    pub fn last_command(&self) -> Option<Twist> {
        self.shared.state.lock().unwrap().cmd_log.back().map(|(_, c)| *c)
    }

    /// Plans the exploration tour from the current state.
    pub fn plan_tour(&self) -> Vec<TourStep> {
        let mut st = self.shared.state.lock().unwrap();
        let t = self.shared.now();
        st.world.advance_to(t);
        tour::plan_tour(&st.world)
    }

    /// Replays tour steps in sim time. With `pace` set, each step takes
    /// `duration / pace` of wall time.
    pub fn run_tour(&self, steps: &[TourStep], pace: Option<f64>) {
        for s in steps {
            if self.shared.stop.load(Ordering::SeqCst) {
                return;
            }
            {
                let mut st = self.shared.state.lock().unwrap();
                let t = self.shared.now();
                st.world.advance_to(t);
                st.world.drive(&s.cmd, s.duration);
                // Keep sim time aligned with the wall clock afterwards.
                st.world.time = st.world.time.min(t);
            }
            if let Some(p) = pace.filter(|p| *p > 0.0) {
                std::thread::sleep(Duration::from_secs_f64(s.duration / p));
            }
        }
    }

    pub fn shutdown(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.ticker.take() {
            let _ = t.join();
        }
        self.node.shutdown();
    }

    pub fn publications(&self) -> (&Publication, &Publication, &Publication) {
        (&self.pubs.odom, &self.pubs.map, &self.pubs.rosout)
    }
}

impl Drop for RobotNode {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn tick_loop(shared: &Shared, pubs: &Pubs, period: Duration, odom_every: u32) {
    let mut tick: u64 = 0;
    let mut odom_seq = 0u32;
    let mut published_revealed = None;
    let mut last_map = Instant::now();
    let mut next = Instant::now();
    while !shared.stop.load(Ordering::SeqCst) {
        let (pose, cmd, map) = {
            let mut st = shared.state.lock().unwrap();
            let t = shared.now();
            st.world.advance_to(t);
            let cmd = st.world.effective_cmd_at(t);
            let revealed = st.world.known.revealed();
            let map = if published_revealed != Some(revealed) || last_map.elapsed() >= Duration::from_secs(1) {
                published_revealed = Some(revealed);
                last_map = Instant::now();
                st.map_seq += 1;
                Some(st.world.known.to_grid(st.map_seq, RosTime::now(), shared.load_time))
            } else {
                None
            };
            (st.world.robot.pose, cmd, map)
        };
        if let Some(map) = map {
            publish_logged(&pubs.map, &map);
        }
        if tick.is_multiple_of(u64::from(odom_every)) {
            publish_logged(&pubs.odom, &odom_msg(odom_seq, shared.spawn, pose, cmd));
            odom_seq = odom_seq.wrapping_add(1);
        }
        tick += 1;
        next += period;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else {
            next = now;
        }
    }
}
