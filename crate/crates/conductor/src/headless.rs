use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use multiview_core::kinematics::ArmKind;

use crate::config::SimConfig;
use crate::protocol::{ClientMessage, ErrorCode, Role, ServerMessage, Snapshot};
use crate::sim::{ClientId, Inbound, Simulation};
use crate::ConductorError;

/// A message sent by a named scripted client at a given simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub at_s: f64,
    pub client: String,
    pub message: ClientMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub duration_s: f64,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

impl Script {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConductorError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn ticks(&self, cfg: &SimConfig) -> u64 {
        (self.duration_s * cfg.tick_rate_hz as f64).round() as u64
    }

    /// Rejects scripts that are out of order, out of range or name ids the
    /// configuration does not define.
    pub fn validate(&self, cfg: &SimConfig) -> Result<(), ConductorError> {
        let bad = |i: usize, msg: String| Err(ConductorError::Script(format!("event {i}: {msg}")));
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(ConductorError::Script("duration_s must be positive".into()));
        }
        let mut prev = 0.0;
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.at_s >= prev) || ev.at_s > self.duration_s {
                return bad(i, format!("time {} out of order or past the end", ev.at_s));
            }
            prev = ev.at_s;
            let arm_ok = |id, kind| cfg.is_kind(id, kind);
            match &ev.message {
                ClientMessage::Hello { console_id: Some(c), .. } if !cfg.consoles.contains(c) => {
                    return bad(i, format!("unknown console {c}"))
                }
                ClientMessage::Engage { psm, .. } if !arm_ok(psm, ArmKind::Psm) => {
                    return bad(i, format!("unknown PSM {psm}"))
                }
                ClientMessage::Routing { cmd } => {
                    if let Some(id) = cmd.arms().into_iter().find(|id| cfg.arm(id).is_none()) {
                        return bad(i, format!("unknown arm {id}"));
                    }
                }
                ClientMessage::Record { .. } => {
                    return bad(i, "recording is controlled by the runner".into())
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptError {
    pub tick: u64,
    pub client: String,
    pub code: ErrorCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadlessReport {
    pub ticks: u64,
    pub simulated_s: f64,
    pub wall_s: f64,
    pub recording: String,
    pub recording_bytes: u64,
    pub recording_sha256: String,
    pub records: u64,
    pub frames_captured: u64,
    pub tuples_aligned: u64,
    pub arm_failures: u64,
    pub errors: Vec<ScriptError>,
    pub final_snapshot: Snapshot,
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String, ConductorError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Runs the script against a fresh simulation with recording on from the
/// first tick to the last. Identical inputs give a byte-identical file.
pub fn run_headless(
    config: &SimConfig,
    script: &Script,
    out: impl AsRef<Path>,
) -> Result<HeadlessReport, ConductorError> {
    config.validate()?;
    script.validate(config)?;
    let started = Instant::now();
    let mut sim = Simulation::new(config.clone())?;
    let ticks = script.ticks(config);

    let mut ids: BTreeMap<&str, ClientId> = BTreeMap::new();
    let mut names: Vec<&str> = Vec::new();
    let mut queued: Vec<(u64, ClientId, String)> = Vec::with_capacity(script.events.len());
    for ev in &script.events {
        let next = ids.len() as ClientId + 1;
        let id = *ids.entry(ev.client.as_str()).or_insert_with(|| {
            names.push(ev.client.as_str());
            next
        });
        let tick = (ev.at_s * config.tick_rate_hz as f64).round() as u64;
        let text = serde_json::to_string(&ev.message)?;
        queued.push((tick.min(ticks.saturating_sub(1)), id, text));
    }

    sim.start_recording(out.as_ref())?;
    let mut errors = Vec::new();
    let mut pending = queued.into_iter().peekable();
    for tick in 0..ticks {
        let mut inputs = Vec::new();
        while let Some((_, client, text)) = pending.next_if(|(t, _, _)| *t == tick) {
            inputs.push(Inbound::Message { client, text });
        }
        for (client, reply) in sim.step(inputs).replies {
            if let ServerMessage::Error { code, detail } = reply {
                errors.push(ScriptError {
                    tick,
                    client: names[client as usize - 1].to_owned(),
                    code,
                    detail,
                });
            }
        }
    }
    let status = sim.recording_status();
    let path = sim.stop_recording()?;
    let recording_sha256 = file_sha256(&path)?;
    Ok(HeadlessReport {
        ticks,
        simulated_s: ticks as f64 / config.tick_rate_hz as f64,
        wall_s: started.elapsed().as_secs_f64(),
        recording: path.display().to_string(),
        recording_bytes: fs::metadata(&path)?.len(),
        recording_sha256,
        records: status.records,
        frames_captured: sim.telemetry().frames_captured,
        tuples_aligned: sim.telemetry().tuples_aligned,
        arm_failures: sim.arm_failures(),
        errors,
        final_snapshot: sim.snapshot(),
    })
}

/// Hello from `client` as the console `console`.
pub fn hello(at_s: f64, client: &str, console: &str) -> ScriptEvent {
    ScriptEvent {
        at_s,
        client: client.to_owned(),
        message: ClientMessage::Hello {
            role: Role::Console,
            console_id: Some(console.into()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::RoutingRequest;

    #[test]
    fn rejects_unknown_ids_and_disorder() {
        let cfg = SimConfig::reference();
        let ok = Script {
            duration_s: 1.0,
            events: vec![hello(0.0, "a", "console1")],
        };
        ok.validate(&cfg).unwrap();

        let unknown_console = Script {
            duration_s: 1.0,
            events: vec![hello(0.0, "a", "console9")],
        };
        assert!(unknown_console.validate(&cfg).is_err());

        let unknown_arm = Script {
            duration_s: 1.0,
            events: vec![ScriptEvent {
                at_s: 0.1,
                client: "a".into(),
                message: ClientMessage::Routing {
                    cmd: RoutingRequest::AcquirePsm { psm: "PSM7".into() },
                },
            }],
        };
        assert!(unknown_arm.validate(&cfg).is_err());

        let disorder = Script {
            duration_s: 1.0,
            events: vec![hello(0.5, "a", "console1"), hello(0.2, "b", "console2")],
        };
        assert!(disorder.validate(&cfg).is_err());

        let late = Script {
            duration_s: 1.0,
            events: vec![hello(1.5, "a", "console1")],
        };
        assert!(late.validate(&cfg).is_err());
    }
}
