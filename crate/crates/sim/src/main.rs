use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use rosdeck_core::master_api::MasterUri;
use rosdeck_sim::floorplan::DEFAULT_RESOLUTION;
use rosdeck_sim::{spawn_pose, Floorplan, MasterServer, RobotNode, RobotOptions};

/// Embedded ROS master plus a simulated differential-drive robot.
#[derive(Parser, Debug)]
#[command(name = "sim", version)]
struct Args {
    /// ASCII floorplan ('#' wall, '.' free).
    #[arg(long)]
    floorplan: PathBuf,
    #[arg(long, default_value_t = 11311)]
    master_port: u16,
    /// Spawn at a seeded random free cell instead of the center.
    #[arg(long)]
    seed: Option<u64>,
    /// Meters per cell.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
    /// Interface the master listens on.
    #[arg(long, default_value = "0.0.0.0")]
    bind: String,
    /// Host advertised in the robot's URIs.
    #[arg(long)]
    advertise_host: Option<String>,
    /// Run the scripted exploration tour at the given speed-up (1 = real time).
    #[arg(long)]
    tour: Option<f64>,
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    if let Err(e) = run(Args::parse()) {
        eprintln!("sim: {e}");
        std::process::exit(1);
    }
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let plan = Floorplan::load(&args.floorplan, args.resolution)?;
    let spawn = spawn_pose(&plan, args.seed).ok_or("floorplan has no free cell")?;
    let addr: SocketAddr = format!("{}:{}", args.bind, args.master_port).parse()?;
    let master = MasterServer::bind(addr)?;
    tracing::info!(uri = master.uri(), "master up; {} free cells", plan.free_count());
    let uri = MasterUri::new("127.0.0.1", master.port())?;
    let mut opts = RobotOptions::new(uri, spawn);
    opts.advertise_host = args.advertise_host;
    let robot = RobotNode::start(plan, opts, Duration::from_secs(10))?;
    tracing::info!(x = spawn.x, y = spawn.y, "robot up");
    if let Some(pace) = args.tour {
        let steps = robot.plan_tour();
        tracing::info!("touring: {} steps", steps.len());
        robot.run_tour(&steps, Some(pace));
        tracing::info!(revealed = robot.known_map().revealed(), "tour finished");
    }
    // Runs until the process is killed; master and robot stay alive here.
    loop {
        std::thread::park();
    }
}
