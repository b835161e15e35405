//! `rosdeck-core`: a from-scratch ROS1 client stack.
//!
//! * [`msg`]: the supported message set, md5 checksums and binary codec.
//! * [`xmlrpc`] and [`master_api`]: master registration, lookup and the
//!   slave API each node serves.
//! * [`tcpros`]: connection headers and message framing.
//! * [`node`]: advertise, publish, subscribe and tear down.
//! * [`config`]: the persisted master/widget configuration.
//! * [`kinematics`]: planar differential-drive motion, generic over the float type.

pub mod config;
pub mod kinematics;
pub mod master_api;
pub mod msg;
pub mod node;
pub mod tcpros;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod xmlrpc;

pub use kinematics::{integrate_arc, wrap_angle, Pose2};

pub type Pose2d = Pose2<f64>;
pub type Pose2f = Pose2<f32>;
