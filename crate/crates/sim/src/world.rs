//! Robot kinematics, collision and the stepped world.

use rosdeck_core::msg::Twist;
use rosdeck_core::{integrate_arc, Pose2d};

use crate::floorplan::Floorplan;
use crate::mapper::KnownMap;

/// Longest single integration step inside the world.
pub const MAX_SUBSTEP: f64 = 0.02;
pub const DEFAULT_CMD_TIMEOUT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose2d,
    pub last_cmd: Twist,
    /// Sim time the last command arrived, if any.
    pub last_cmd_time: Option<f64>,
}

impl RobotState {
    pub fn at(pose: Pose2d) -> Self {
        RobotState { pose, last_cmd: Twist::ZERO, last_cmd_time: None }
    }
}

/// Exact constant-twist arc using `linear.x` and `angular.z`; no collision.
pub fn integrate_twist(s: &RobotState, cmd: &Twist, dt: f64) -> RobotState {
    RobotState { pose: integrate_arc(s.pose, cmd.linear.x, cmd.angular.z, dt), ..s.clone() }
}

/// One step with the collision rule: a move ending in a wall keeps the old
/// position but takes the new heading.
pub fn step_pose(plan: &Floorplan, pose: Pose2d, v: f64, omega: f64, dt: f64) -> Pose2d {
    let next = integrate_arc(pose, v, omega, dt);
    if plan.blocks(next.x, next.y) {
        Pose2d { x: pose.x, y: pose.y, theta: next.theta }
    } else {
        next
    }
}

/// Ground truth, knowledge and robot state advanced in sim time.
#[derive(Debug, Clone)]
pub struct World {
    pub plan: Floorplan,
    pub known: KnownMap,
    pub robot: RobotState,
    pub time: f64,
    pub cmd_timeout: f64,
    pub sensor_radius: f64,
}

impl World {
    pub fn new(plan: Floorplan, spawn: Pose2d, sensor_radius: f64) -> World {
        let mut known = KnownMap::unknown(&plan);
        known.reveal(&plan, spawn.x, spawn.y, sensor_radius);
        World { plan, known, robot: RobotState::at(spawn), time: 0.0, cmd_timeout: DEFAULT_CMD_TIMEOUT, sensor_radius }
    }

    /// Command in force at sim time `t` (zero once it is older than the timeout).
    pub fn effective_cmd_at(&self, t: f64) -> Twist {
        match self.robot.last_cmd_time {
            Some(at) if t - at < self.cmd_timeout => self.robot.last_cmd,
            _ => Twist::ZERO,
        }
    }

    /// Advances to sim time `t` under the current command, in steps of at
    /// most [`MAX_SUBSTEP`], splitting exactly at the command timeout.
    pub fn advance_to(&mut self, t: f64) {
        while self.time < t {
            let mut end = (self.time + MAX_SUBSTEP).min(t);
            if let Some(at) = self.robot.last_cmd_time {
                let expiry = at + self.cmd_timeout;
                if self.time < expiry && expiry < end {
                    end = expiry;
                }
            }
            let cmd = self.effective_cmd_at(self.time);
            self.step(&cmd, end - self.time);
            self.time = end;
        }
    }

    fn step(&mut self, cmd: &Twist, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        if !cmd.is_zero() {
            self.robot.pose = step_pose(&self.plan, self.robot.pose, cmd.linear.x, cmd.angular.z, dt);
        }
        self.known.reveal(&self.plan, self.robot.pose.x, self.robot.pose.y, self.sensor_radius);
    }

    /// Records a command arriving at sim time `t`.
    pub fn command(&mut self, t: f64, cmd: Twist) {
        self.advance_to(t);
        self.robot.last_cmd = cmd;
        self.robot.last_cmd_time = Some(t);
    }

    /// Applies `cmd` for `duration` seconds regardless of the timeout, then stops.
    pub fn drive(&mut self, cmd: &Twist, duration: f64) {
        let end = self.time + duration;
        while self.time < end {
            let dt = MAX_SUBSTEP.min(end - self.time);
            self.step(cmd, dt);
            self.time += dt;
        }
        self.robot.last_cmd = Twist::ZERO;
        self.robot.last_cmd_time = Some(self.time);
    }
}
