mod common;

use std::time::{Duration, Instant};

use common::{demo_config, http, local_options, Rig};
use rosdeck_core::config::load_config;
use rosdeck_core::master_api::{MasterClient, MasterUri};
use rosdeck_gateway::{spawn_server, Gateway};
use rosdeck_sim::Sim;
use serde_json::json;

fn system_state(rig: &Rig) -> rosdeck_core::master_api::SystemState {
    let mut s = MasterClient::new(rig.sim.master_uri(), Duration::from_secs(2)).get_system_state("/test").unwrap();
    s.publishers.sort();
    s.subscribers.sort();
    s
}

#[test]
fn status_starts_disconnected() {
    let rig = Rig::start();
    let (code, body) = http("GET", &rig.url("/api/status"), None);
    assert_eq!(code, 200);
    assert_eq!(body["type"], "status");
    assert_eq!(body["state"], "disconnected");
    assert_eq!(body["master"], rig.sim.master_uri().to_string());
    assert_eq!(body["warnings"], json!([]));
}

#[test]
fn connect_registers_every_widget() {
    let rig = Rig::start();
    let t0 = Instant::now();
    let (code, body) = http("POST", &rig.url("/api/connect"), None);
    assert!(t0.elapsed() < Duration::from_secs(1), "took {:?}", t0.elapsed());
    assert_eq!(code, 200, "{body}");
    assert_eq!(body["state"], "connected");
    assert_eq!(body["warnings"], json!([]));
    let s = system_state(&rig);
    assert!(s.publishers_of("/cmd_vel").contains(&"/rosdeck_gateway".to_string()));
    assert!(s.subscribers_of("/map").contains(&"/rosdeck_gateway".to_string()));
    assert!(s.subscribers_of("/rosout").contains(&"/rosdeck_gateway".to_string()));
}

#[test]
fn disconnect_reconnect_cycle_is_idempotent() {
    let rig = Rig::start();
    assert_eq!(http("POST", &rig.url("/api/connect"), None).0, 200);
    let first = system_state(&rig);
    let (code, body) = http("POST", &rig.url("/api/disconnect"), None);
    assert_eq!((code, body["state"].as_str()), (200, Some("disconnected")));
    assert!(!system_state(&rig).mentions("/rosdeck_gateway"));
    assert_eq!(http("POST", &rig.url("/api/disconnect"), None).0, 200);
    assert_eq!(http("POST", &rig.url("/api/connect"), None).0, 200);
    assert_eq!(http("POST", &rig.url("/api/connect"), None).0, 200);
    assert_eq!(system_state(&rig), first);
}

#[test]
fn wrong_port_reports_transport_reason() {
    let free = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let sim = Sim::start_local().unwrap();
    let rig = Rig::with_config(sim, |mut c| {
        c.master_uri = MasterUri::new("127.0.0.1", free).unwrap();
        c
    });
    let t0 = Instant::now();
    let (code, body) = http("POST", &rig.url("/api/connect"), None);
    assert!(t0.elapsed() < Duration::from_secs(3));
    assert_eq!(code, 502);
    assert_eq!(body["state"], "disconnected");
    assert!(!body["reason"].as_str().unwrap().is_empty(), "{body}");
    assert_eq!(rig.gw.status().state, rosdeck_gateway::protocol::ConnState::Disconnected);
}

#[test]
fn failed_widget_becomes_a_warning() {
    let sim = Sim::start_local().unwrap();
    let rig = Rig::with_config(sim, |mut c| {
        c.widgets.push(rosdeck_core::config::WidgetConfig {
            id: "map2".into(),
            topic: "/map".into(),
            kind: rosdeck_core::config::WidgetKind::Gridmap,
        });
        c
    });
    let (code, body) = http("POST", &rig.url("/api/connect"), None);
    assert_eq!(code, 200);
    assert_eq!(body["state"], "connected");
    let w = body["warnings"].as_array().unwrap();
    assert_eq!(w.len(), 1, "{body}");
    assert!(w[0].as_str().unwrap().contains("map2"));
}

#[test]
fn config_get_put_persists() {
    let sim = Sim::start_local().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rosdeck.json");
    let cfg = demo_config(sim.master_uri());
    rosdeck_core::config::save_config(&cfg, &path).unwrap();
    let gw = Gateway::new(load_config(&path).unwrap(), Some(path.clone()), local_options());
    let server = spawn_server(gw.clone(), "127.0.0.1:0".parse().unwrap()).unwrap();
    let url = format!("{}/api/config", server.base_url());

    let (code, body) = http("GET", &url, None);
    assert_eq!(code, 200);
    assert_eq!(serde_json::from_value::<rosdeck_core::config::AppConfig>(body.clone()).unwrap(), cfg);

    let mut bad = body.clone();
    bad["widgets"][0]["max_linear"] = json!(-1.0);
    let (code, err) = http("PUT", &url, Some(&bad.to_string()));
    assert_eq!(code, 422);
    assert_eq!(err["violations"][0]["path"], "widgets[0].max_linear");
    let (code, _) = http("PUT", &url, Some("{not json"));
    assert_eq!(code, 400);
    assert_eq!(load_config(&path).unwrap(), cfg);

    let mut good = body;
    good["name"] = json!("renamed");
    let (code, status) = http("PUT", &url, Some(&good.to_string()));
    assert_eq!(code, 200);
    assert_eq!(status["type"], "status");
    assert_eq!(load_config(&path).unwrap().name, "renamed");
    assert_eq!(http("GET", &url, None).1["name"], "renamed");
    drop(server);
    gw.disconnect();
}

#[test]
fn config_change_while_connected_reconnects() {
    let rig = Rig::start();
    assert_eq!(http("POST", &rig.url("/api/connect"), None).0, 200);
    let mut cfg = http("GET", &rig.url("/api/config"), None).1;
    cfg["widgets"][0]["topic"] = json!("/teleop");
    let (code, status) = http("PUT", &rig.url("/api/config"), Some(&cfg.to_string()));
    assert_eq!(code, 200);
    assert_eq!(status["state"], "connected");
    let s = system_state(&rig);
    assert!(s.publishers_of("/teleop").contains(&"/rosdeck_gateway".to_string()));
    assert!(!s.publishers_of("/cmd_vel").contains(&"/rosdeck_gateway".to_string()));
}
