#![allow(dead_code)]

use std::path::PathBuf;

use multiview_conductor::headless::{hello, Script, ScriptEvent};
use multiview_conductor::protocol::{PoseDelta, RoutingRequest};
use multiview_conductor::{ClientMessage, ServerMessage, SimConfig, Simulation, Snapshot};
use multiview_core::kinematics::{RigidTransform, Vec3};
use multiview_core::teleop::MasterSide;

pub fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn quiescent() -> SimConfig {
    let mut c = SimConfig::reference();
    c.cameras.clear();
    c.clock.slaves.clear();
    c
}

/// Sends one tick of inputs and returns the replies in order.
pub fn tick(sim: &mut Simulation, msgs: &[(u64, String)]) -> Vec<(u64, ServerMessage)> {
    let inputs = msgs
        .iter()
        .map(|(c, t)| multiview_conductor::Inbound::message(*c, t.clone()))
        .collect();
    sim.step(inputs).replies
}

pub fn send(sim: &mut Simulation, client: u64, msg: &ClientMessage) -> ServerMessage {
    let mut r = tick(sim, &[(client, serde_json::to_string(msg).unwrap())]);
    assert_eq!(r.len(), 1);
    r.remove(0).1
}

pub fn ok(reply: ServerMessage) {
    match reply {
        ServerMessage::Ack { .. } | ServerMessage::Welcome { .. } => {}
        other => panic!("unexpected reply {other:?}"),
    }
}

pub fn console_hello(console: &str) -> ClientMessage {
    ClientMessage::Hello {
        role: multiview_conductor::protocol::Role::Console,
        console_id: Some(console.into()),
    }
}

pub fn acquire(psm: &str) -> ClientMessage {
    ClientMessage::Routing {
        cmd: RoutingRequest::AcquirePsm { psm: psm.into() },
    }
}

pub fn engage(psm: &str, side: MasterSide) -> ClientMessage {
    ClientMessage::Engage {
        psm: psm.into(),
        side: Some(side),
        on: true,
    }
}

pub fn translate(side: MasterSide, d: Vec3) -> ClientMessage {
    ClientMessage::Input {
        master_side: side,
        pose_delta: PoseDelta {
            translation: d,
            rotation: Vec3::ZERO,
        },
        clutch: None,
        grip: None,
    }
}

/// Binds `client` to `console`, acquires `psm` and engages it on the right
/// master.
pub fn take(sim: &mut Simulation, client: u64, console: &str, psm: &str) {
    ok(send(sim, client, &console_hello(console)));
    ok(send(sim, client, &acquire(psm)));
    ok(send(sim, client, &engage(psm, MasterSide::Right)));
}

pub fn arm<'a>(s: &'a Snapshot, id: &str) -> &'a multiview_conductor::protocol::ArmSnapshot {
    s.arms.iter().find(|a| a.id.as_str() == id).unwrap()
}

/// Commanded tip pose under the incremental camera-frame law, written
/// out independently: the tip keeps its engage pose in the camera frame,
/// moves by the scaled master displacement along camera axes and takes the
/// master orientation through the engage-time offset.
pub fn camera_frame_oracle(
    tip0: &RigidTransform,
    camera: &RigidTransform,
    scale: f64,
    master0: &RigidTransform,
    master1: &RigidTransform,
) -> RigidTransform {
    let tip_cam0 = camera.inverse().compose(tip0);
    let offset = tip_cam0.rotation.compose(&master0.rotation.inverse());
    let tip_cam = RigidTransform::new(
        offset.compose(&master1.rotation),
        tip_cam0.translation + (master1.translation - master0.translation) * scale,
    );
    camera.compose(&tip_cam)
}

/// Master position at input `j` of a circle of `radius` in the display
/// x-y plane that starts at the origin and completes one turn every
/// `period` inputs.
pub fn circle_point(j: usize, radius: f64, period: usize) -> Vec3 {
    let a = std::f64::consts::TAU * j as f64 / period as f64;
    Vec3::new(radius * (a.cos() - 1.0), radius * a.sin(), 0.0)
}

/// One console traces circles with `psm` for `duration_s`, one input every
/// `every_ms`. Inputs start at 0.1 s.
pub fn circle_script(console: &str, psm: &str, duration_s: f64, every_ms: u64, radius: f64) -> Script {
    let client = format!("{console}-client");
    let mut events = vec![
        hello(0.0, &client, console),
        ScriptEvent {
            at_s: 0.001,
            client: client.clone(),
            message: acquire(psm),
        },
        ScriptEvent {
            at_s: 0.002,
            client: client.clone(),
            message: engage(psm, MasterSide::Right),
        },
    ];
    append_circle(&mut events, &client, duration_s, every_ms, radius);
    Script { duration_s, events }
}

pub fn append_circle(events: &mut Vec<ScriptEvent>, client: &str, duration_s: f64, every_ms: u64, radius: f64) {
    let first_ms = 100;
    let count = ((duration_s * 1000.0) as u64 - first_ms) / every_ms;
    let mut prev = Vec3::ZERO;
    for j in 1..count as usize {
        let p = circle_point(j, radius, 1000);
        events.push(ScriptEvent {
            at_s: (first_ms + j as u64 * every_ms) as f64 / 1000.0,
            client: client.to_owned(),
            message: translate(MasterSide::Right, p - prev),
        });
        prev = p;
    }
}

/// Merges two scripts' events in time order (stable for equal times).
pub fn merge(a: Script, b: Script) -> Script {
    let mut events = a.events;
    events.extend(b.events);
    events.sort_by(|x, y| x.at_s.total_cmp(&y.at_s));
    Script {
        duration_s: a.duration_s.max(b.duration_s),
        events,
    }
}

/// Sum of the translation deltas in the order the simulation applies them.
pub fn accumulated(deltas: impl IntoIterator<Item = Vec3>) -> Vec3 {
    deltas.into_iter().fold(Vec3::ZERO, |acc, d| acc + d)
}
