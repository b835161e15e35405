use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use rosdeck_core::config::load_config;
use rosdeck_gateway::{Gateway, GatewayOptions};

/// Dashboard gateway: HTTP API and WebSocket at /ws.
#[derive(Parser, Debug)]
#[command(name = "gateway", version)]
struct Args {
    /// Config file; PUT /api/config rewrites it.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    http_port: u16,
    /// Connect to the configured master at startup.
    #[arg(long)]
    autoconnect: bool,
    #[arg(long, default_value = "0.0.0.0")]
    bind: String,
    /// Host advertised to the ROS master.
    #[arg(long)]
    advertise_host: Option<String>,
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    if let Err(e) = run(Args::parse()) {
        eprintln!("gateway: {e}");
        std::process::exit(1);
    }
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = load_config(&args.config)?;
    let addr: SocketAddr = format!("{}:{}", args.bind, args.http_port).parse()?;
    let opts = GatewayOptions { advertise_host: args.advertise_host, ..Default::default() };
    let gw = Gateway::new(cfg, Some(args.config), opts);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!("gateway listening on http://{}", listener.local_addr()?);
        if args.autoconnect {
            let gw = gw.clone();
            tokio::task::spawn_blocking(move || {
                let s = gw.connect();
                tracing::info!(state = ?s.state, reason = ?s.reason, "autoconnect");
            });
        }
        axum::serve(listener, rosdeck_gateway::server::router(gw)).await
    })?;
    Ok(())
}
