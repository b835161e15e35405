//! `rosdeck-sim`: a desk-scale test world speaking real XML-RPC and TCPROS.
//!
//! [`master::MasterServer`] is a reference ROS master. [`robot::RobotNode`]
//! is a differential-drive robot that reveals a ground-truth
//! [`floorplan::Floorplan`] around itself and publishes the result as a
//! latched `/map`.

pub mod floorplan;
pub mod mapper;
pub mod master;
pub mod robot;
pub mod tour;
pub mod world;

use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rosdeck_core::master_api::MasterUri;
use rosdeck_core::Pose2d;

pub use floorplan::{Floorplan, FloorplanError};
pub use master::{MasterRegistry, MasterServer};
pub use robot::{RobotNode, RobotOptions};
pub use world::{integrate_twist, RobotState, World};

/// Path of the apartment floorplan shipped with the workspace.
pub fn shipped_floorplan() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../assets/apartment.txt"))
}

/// Spawn pose: the free cell nearest the plan center, or a seeded random
/// free cell. Heading is always zero.
pub fn spawn_pose(plan: &Floorplan, seed: Option<u64>) -> Option<Pose2d> {
    let (i, j) = match seed {
        None => plan.central_free_cell()?,
        Some(s) => plan.free_cells().choose(&mut rand::rngs::StdRng::seed_from_u64(s))?,
    };
    let (x, y) = plan.cell_center(i, j);
    Some(Pose2d::new(x, y, 0.0))
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Floorplan(#[from] FloorplanError),
    #[error("floorplan has no free cell")]
    NoFreeCell,
    #[error("cannot start master: {0}")]
    Master(std::io::Error),
    #[error(transparent)]
    Node(#[from] rosdeck_core::node::NodeError),
}

/// Master and robot running together.
pub struct Sim {
    pub robot: RobotNode,
    pub master: MasterServer,
}

impl Sim {
    /// Starts a master on `master_addr` and a robot at `spawn` (or the default spawn).
    pub fn start(plan: Floorplan, master_addr: SocketAddr, spawn: Option<Pose2d>) -> Result<Sim, SimError> {
        let spawn = match spawn {
            Some(p) => p,
            None => spawn_pose(&plan, None).ok_or(SimError::NoFreeCell)?,
        };
        let master = MasterServer::bind(master_addr).map_err(SimError::Master)?;
        let uri: MasterUri = master.uri().parse().expect("master reports a valid URI");
        let mut opts = RobotOptions::new(uri, spawn);
        opts.advertise_host = Some("127.0.0.1".into());
        let robot = RobotNode::start(plan, opts, Duration::from_secs(5))?;
        Ok(Sim { robot, master })
    }

    /// Shipped apartment on an ephemeral loopback port.
    pub fn start_local() -> Result<Sim, SimError> {
        let plan = Floorplan::load(shipped_floorplan(), floorplan::DEFAULT_RESOLUTION)?;
        Sim::start(plan, "127.0.0.1:0".parse().expect("static addr"), None)
    }

    pub fn master_uri(&self) -> MasterUri {
        self.master.uri().parse().expect("master reports a valid URI")
    }
}

impl Drop for Sim {
    fn drop(&mut self) {
        // Robot first so its unregister calls reach the master.
        self.robot.shutdown();
        self.master.shutdown();
    }
}
