//! `rosdeck-gateway`: the operator-facing service.
//!
//! A [`session::Gateway`] owns the active config and, while connected, one ROS
//! node whose widget pipelines feed dashboard clients through [`hub::Hub`].
//! [`server`] exposes it over HTTP and a WebSocket at `/ws`.

pub mod frame;
pub mod hub;
pub mod protocol;
pub mod server;
pub mod session;
pub mod teleop;

pub use frame::{gridmap_to_frame, occupancy_to_gray, GridFrame};
pub use server::{spawn_server, ServerHandle};
pub use session::{Gateway, GatewayOptions};
pub use teleop::{joystick_to_twist, JoystickSample};
