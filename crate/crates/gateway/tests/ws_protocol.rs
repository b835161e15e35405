mod common;

use std::time::{Duration, Instant};

use common::{http, is_type, wait_until, Rig, WsClient};
use rosdeck_gateway::protocol::parse_frame;

const WAIT: Duration = Duration::from_secs(3);

fn connected_rig() -> Rig {
    let rig = Rig::start();
    assert_eq!(http("POST", &rig.url("/api/connect"), None).0, 200);
    rig
}

#[test]
fn first_event_is_status() {
    let rig = Rig::start();
    let mut c = WsClient::connect(&rig.server.ws_url());
    let s = c.next(WAIT).unwrap();
    assert!(is_type(&s, "status"));
    assert_eq!(s["state"], "disconnected");
}

#[test]
fn status_events_follow_transitions() {
    let rig = Rig::start();
    let mut c = WsClient::connect(&rig.server.ws_url());
    c.next(WAIT).unwrap();
    rig.gw.connect();
    let states: Vec<String> = (0..2).map(|_| c.wait_for(WAIT, |v| is_type(v, "status")).unwrap()["state"].as_str().unwrap().to_string()).collect();
    assert_eq!(states, ["connecting", "connected"]);
    rig.gw.disconnect();
    assert_eq!(c.wait_for(WAIT, |v| is_type(v, "status")).unwrap()["state"], "disconnected");
}

#[test]
fn two_clients_receive_identical_frames() {
    let rig = connected_rig();
    let mut a = WsClient::connect(&rig.server.ws_url());
    let mut b = WsClient::connect(&rig.server.ws_url());
    assert!(wait_until(WAIT, || rig.gw.client_count() == 2));
    let fa = a.wait_for(WAIT, |v| is_type(v, "gridmap_frame")).unwrap();
    let target = fa["seq"].as_u64().unwrap() + 1;
    let fa = a.wait_for(WAIT, |v| is_type(v, "gridmap_frame") && v["seq"].as_u64() == Some(target)).unwrap();
    let fb = b.wait_for(WAIT, |v| is_type(v, "gridmap_frame") && v["seq"].as_u64() == Some(target)).unwrap();
    assert_eq!(fa, fb);
    let f = parse_frame(&fa).unwrap();
    assert_eq!(f.widget, "map1");
    assert_eq!(f.cells.len(), (f.width * f.height) as usize);
}

#[test]
fn frames_arrive_in_seq_order() {
    let rig = connected_rig();
    let mut c = WsClient::connect(&rig.server.ws_url());
    let mut last = None;
    let end = Instant::now() + Duration::from_millis(2500);
    let mut n = 0;
    while Instant::now() < end {
        if let Some(v) = c.next(Duration::from_millis(100)) {
            if is_type(&v, "gridmap_frame") {
                let s = v["seq"].as_u64().unwrap();
                assert!(last.is_none_or(|l| s >= l), "seq {s} after {last:?}");
                last = Some(s);
                n += 1;
            }
        }
    }
    assert!(n >= 2, "only {n} frames");
}

#[test]
fn late_client_gets_latest_frame() {
    let rig = connected_rig();
    assert!(wait_until(WAIT, || rig.gw.latest_frame("map1").is_some()));
    let mut c = WsClient::connect(&rig.server.ws_url());
    assert!(is_type(&c.next(WAIT).unwrap(), "status"));
    assert!(is_type(&c.next(WAIT).unwrap(), "gridmap_frame"));
}

#[test]
fn logger_forwards_rosout() {
    let rig = connected_rig();
    let mut c = WsClient::connect(&rig.server.ws_url());
    let log = c.wait_for(WAIT, |v| is_type(v, "log")).unwrap();
    assert_eq!(log["widget"], "log1");
    assert_eq!(log["level"], 2);
    assert_eq!(log["name"], "/sim_robot");
    assert!(log["msg"].as_str().unwrap().contains("started"));
    assert!(log["stamp"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_messages_get_errors_and_keep_the_connection() {
    let rig = connected_rig();
    let mut c = WsClient::connect(&rig.server.ws_url());
    c.send_text(r#"{"type":"dance"}"#);
    let e = c.wait_for(WAIT, |v| is_type(v, "error")).unwrap();
    assert!(e["reason"].as_str().unwrap().contains("unknown message type"));
    c.send_text("not json");
    assert!(c.wait_for(WAIT, |v| is_type(v, "error")).is_some());
    c.joystick("nope", 0.0, 0.0, true);
    let e = c.wait_for(WAIT, |v| is_type(v, "error")).unwrap();
    assert!(e["reason"].as_str().unwrap().contains("nope"));
    assert!(c.wait_for(WAIT, |v| is_type(v, "gridmap_frame")).is_some());
}

#[test]
fn joystick_while_disconnected_is_an_error() {
    let rig = Rig::start();
    let mut c = WsClient::connect(&rig.server.ws_url());
    c.joystick("joy1", 0.0, -1.0, true);
    let e = c.wait_for(WAIT, |v| is_type(v, "error")).unwrap();
    assert_eq!(e["reason"], "not connected");
}

#[test]
fn joystick_reaches_sim_within_200ms() {
    let rig = connected_rig();
    rig.wait_joystick_link("joy1");
    let mut c = WsClient::connect(&rig.server.ws_url());
    let t0 = Instant::now();
    c.joystick("joy1", 0.0, -1.0, true);
    assert!(wait_until(Duration::from_millis(1000), || rig.sim.robot.last_command().is_some_and(|t| !t.is_zero())));
    let dt = t0.elapsed();
    assert!(dt < Duration::from_millis(200), "{dt:?}");
    assert_eq!(rig.sim.robot.last_command().unwrap().linear.x, 0.5);
    c.joystick("joy1", 0.0, 0.0, false);
    assert!(wait_until(WAIT, || rig.sim.robot.last_command().is_some_and(|t| t.is_zero())));
}

#[test]
fn one_second_engaged_at_ten_hz() {
    let rig = connected_rig();
    rig.wait_joystick_link("joy1");
    let mut c = WsClient::connect(&rig.server.ws_url());
    let t0 = Instant::now();
    while t0.elapsed() < Duration::from_secs(1) {
        c.joystick("joy1", 0.3, -0.4, true);
        std::thread::sleep(Duration::from_millis(33));
    }
    c.joystick("joy1", 0.0, 0.0, false);
    assert!(wait_until(WAIT, || rig.sim.robot.last_command().is_some_and(|t| t.is_zero())));
    std::thread::sleep(Duration::from_millis(200));
    let cmds = rig.sim.robot.received_commands();
    let moving = cmds.iter().filter(|(_, t)| !t.is_zero()).count();
    let zeros = cmds.iter().filter(|(_, t)| t.is_zero()).count();
    assert!((9..=11).contains(&moving), "{moving} moving commands");
    assert_eq!(zeros, 1);
    assert!(cmds.last().unwrap().1.is_zero());
}

#[test]
fn deadman_stops_a_stalled_stick() {
    let rig = connected_rig();
    rig.wait_joystick_link("joy1");
    let mut c = WsClient::connect(&rig.server.ws_url());
    c.joystick("joy1", 0.0, -1.0, true);
    let t0 = Instant::now();
    assert!(wait_until(Duration::from_secs(2), || rig.sim.robot.last_command().is_some_and(|t| t.is_zero())));
    let dt = t0.elapsed();
    assert!(dt >= Duration::from_millis(480) && dt < Duration::from_millis(800), "{dt:?}");
    std::thread::sleep(Duration::from_millis(300));
    let cmds = rig.sim.robot.received_commands();
    assert_eq!(cmds.iter().filter(|(_, t)| t.is_zero()).count(), 1);
}

#[test]
fn disconnect_while_engaged_sends_zero() {
    let rig = connected_rig();
    rig.wait_joystick_link("joy1");
    let mut c = WsClient::connect(&rig.server.ws_url());
    c.joystick("joy1", 0.0, -1.0, true);
    assert!(wait_until(WAIT, || rig.sim.robot.last_command().is_some_and(|t| !t.is_zero())));
    http("POST", &rig.url("/api/disconnect"), None);
    assert!(wait_until(WAIT, || rig.sim.robot.last_command().is_some_and(|t| t.is_zero())));
}
