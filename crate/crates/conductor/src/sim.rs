use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use multiview_core::clocksync::{SimClock, SlaveSync};
use multiview_core::kinematics::{CameraModel, JointVector};
use multiview_core::pipeline::{
    default_tolerance, latency_report, synth_stereo, LatencyReport, StreamAligner,
};
use multiview_core::recorder::{
    ArmSample, ChannelDescriptor, ChannelKind, FramePayload, KinematicsSample, RecordWriter,
};
use multiview_core::teleop::{
    ArmId, ConsoleId, MasterKey, MasterSide, MasterState, Teleop, WorldState, CAMERA_MASTER,
};

use crate::config::{CameraConfig, SimConfig};
use crate::protocol::{
    parse_client, ArmSnapshot, CameraHold, ClientMessage, Engagement, ErrorCode, RecordAction,
    RecordingStatus, Role, RoutingSnapshot, ServerMessage, SlaveTelemetry, Snapshot, Telemetry,
    PROTOCOL_VERSION,
};
use crate::ConductorError;

pub type ClientId = u64;

/// One queued event from a client, applied at the next tick boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inbound {
    Message { client: ClientId, text: String },
    Disconnect(ClientId),
}

impl Inbound {
    pub fn message(client: ClientId, text: impl Into<String>) -> Self {
        Inbound::Message {
            client,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutput {
    /// Exactly one reply per inbound message, in input order.
    pub replies: Vec<(ClientId, ServerMessage)>,
    /// Snapshot and telemetry to fan out, at the telemetry rate.
    pub publish: Option<(Snapshot, Telemetry)>,
}

/// Kinematics channel of every recording.
pub const KINEMATICS_CHANNEL: u16 = 1;

/// Channel id of the `i`-th configured camera.
pub fn camera_channel(i: usize) -> u16 {
    2 + i as u16
}

pub const TELEMETRY_HZ: u32 = 10;

#[derive(Debug, Clone)]
struct Session {
    console: Option<ConsoleId>,
}

struct Camera {
    cfg: CameraConfig,
    slave: usize,
    seq: u64,
}

struct ActiveRecording {
    writer: RecordWriter<BufWriter<File>>,
    path: PathBuf,
    records: u64,
    errors: u64,
}

/// Reply slot that is filled once the tick has completed.
enum Reply {
    Now(ServerMessage),
    Snapshot,
}

/// The whole simulated system. State after tick `k` is a pure function of
/// the configuration and the ordered inputs of ticks `0..=k`.
pub struct Simulation {
    config: SimConfig,
    tick: u64,
    tick_ns: i64,
    world: WorldState,
    teleop: Teleop,
    masters: BTreeMap<MasterKey, MasterState>,
    sessions: BTreeMap<ClientId, Session>,
    master_clock: SimClock,
    slaves: Vec<SlaveSync>,
    cameras: Vec<Camera>,
    camera_models: BTreeMap<ArmId, CameraModel>,
    arm_index: BTreeMap<ArmId, u8>,
    aligner: Option<StreamAligner<u64>>,
    latency: LatencyReport,
    frame_n: u64,
    kinematics_n: u64,
    frames_captured: u64,
    frames_rejected: u64,
    tuples_aligned: u64,
    window_tuples: u64,
    arm_failures: u64,
    recording: Option<ActiveRecording>,
    last_recording: RecordingStatus,
}

/// First tick at or after event `n` of a `rate_hz` schedule.
fn schedule_tick(n: u64, tick_rate: u32, rate_hz: u32) -> u64 {
    (n * tick_rate as u64).div_ceil(rate_hz as u64)
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, ConductorError> {
        config.validate()?;
        let world = WorldState::new(
            config
                .arms
                .iter()
                .map(|a| (a.id.clone(), (a.model(), JointVector(a.home.clone()))))
                .collect(),
        )?;
        let teleop = Teleop::new(config.routing_table()?, config.teleop_settings(), &world);
        let servo = config.servo()?;
        let slaves = config
            .clock
            .slaves
            .iter()
            .enumerate()
            .map(|(i, s)| SlaveSync::new(s.clone(), servo, config.seed, i as u64))
            .collect::<Result<Vec<_>, _>>()?;
        let cameras = config
            .cameras
            .iter()
            .map(|c| Camera {
                cfg: c.clone(),
                slave: config
                    .clock
                    .slaves
                    .iter()
                    .position(|s| s.id == c.clock)
                    .expect("validated clock id"),
                seq: 0,
            })
            .collect::<Vec<_>>();
        let tolerance = config
            .pipeline
            .tolerance_ns
            .unwrap_or_else(|| default_tolerance(config.frame_rate_hz as f64));
        let aligner = if cameras.is_empty() {
            None
        } else {
            Some(StreamAligner::new(cameras.len(), tolerance)?)
        };
        let latency = latency_report(&config.pipeline.stages, config.pipeline.budget_ns)?;
        let camera_models = config
            .arms
            .iter()
            .filter_map(|a| a.camera_model().map(|m| (a.id.clone(), m)))
            .collect();
        let arm_index = world
            .arms()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), i as u8))
            .collect();
        Ok(Simulation {
            tick_ns: config.tick_ns(),
            master_clock: config.clock.master.clone(),
            config,
            tick: 0,
            world,
            teleop,
            masters: BTreeMap::new(),
            sessions: BTreeMap::new(),
            slaves,
            cameras,
            camera_models,
            arm_index,
            aligner,
            latency,
            frame_n: 0,
            kinematics_n: 0,
            frames_captured: 0,
            frames_rejected: 0,
            tuples_aligned: 0,
            window_tuples: 0,
            arm_failures: 0,
            recording: None,
            last_recording: RecordingStatus {
                active: false,
                path: None,
                records: 0,
                errors: 0,
            },
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Completed ticks.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// True time of the next tick.
    pub fn true_time_ns(&self) -> i64 {
        self.tick as i64 * self.tick_ns
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn teleop(&self) -> &Teleop {
        &self.teleop
    }

    pub fn master(&self, console: &ConsoleId, side: MasterSide) -> MasterState {
        self.masters
            .get(&(console.clone(), side))
            .copied()
            .unwrap_or_default()
    }

    pub fn slaves(&self) -> &[SlaveSync] {
        &self.slaves
    }

    pub fn arm_failures(&self) -> u64 {
        self.arm_failures
    }

    pub fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    /// Applies the inputs, advances every module by one tick and returns
    /// the replies. Never fails: per-message problems become error replies.
    pub fn step(&mut self, inputs: Vec<Inbound>) -> StepOutput {
        let t = self.true_time_ns();
        let mut slots: Vec<(ClientId, Reply)> = Vec::new();
        for input in inputs {
            match input {
                Inbound::Message { client, text } => {
                    let reply = self.handle(client, &text);
                    slots.push((client, reply));
                }
                Inbound::Disconnect(client) => self.disconnect(client),
            }
        }

        let commands = self.teleop.resolve_commands(&self.masters, &self.world);
        self.arm_failures += commands.failures.len() as u64;
        for (id, cmd) in &commands.arms {
            if !cmd.frozen && self.world.set_joints(id, cmd.joints.clone()).is_err() {
                self.arm_failures += 1;
            }
        }

        if self.tick.is_multiple_of(self.config.sync_interval_ticks()) {
            for s in &mut self.slaves {
                s.exchange(&self.master_clock, t);
            }
        }
        let rate = self.config.tick_rate_hz;
        if schedule_tick(self.frame_n, rate, self.config.frame_rate_hz) == self.tick {
            self.capture(t);
            self.frame_n += 1;
        }
        if schedule_tick(self.kinematics_n, rate, self.config.kinematics_rate_hz) == self.tick {
            self.record_kinematics(t);
            self.kinematics_n += 1;
        }

        let telemetry_ticks = (rate / TELEMETRY_HZ) as u64;
        let publish = self.tick.is_multiple_of(telemetry_ticks).then(|| {
            let window_s = (telemetry_ticks as i64 * self.tick_ns) as f64 * 1e-9;
            let fps = self.window_tuples as f64 / window_s;
            self.window_tuples = 0;
            (t, fps)
        });
        self.tick += 1;

        let publish = publish.map(|(t, fps)| (self.snapshot(), self.telemetry_at(t, fps)));
        let replies = slots
            .into_iter()
            .map(|(c, r)| match r {
                Reply::Now(m) => (c, m),
                Reply::Snapshot => (c, ServerMessage::Snapshot(self.snapshot())),
            })
            .collect();
        StepOutput { replies, publish }
    }

    fn handle(&mut self, client: ClientId, text: &str) -> Reply {
        let msg = match parse_client(text) {
            Ok(m) => m,
            Err(e) => return Reply::Now(e),
        };
        let of = msg.type_name();
        let result = match msg {
            ClientMessage::Hello { role, console_id } => return Reply::Now(self.hello(client, role, console_id)),
            ClientMessage::SnapshotRequest => return Reply::Snapshot,
            ClientMessage::Record { action, path } => self.record_request(client, action, path),
            other => self.console_request(client, other),
        };
        Reply::Now(match result {
            Ok(()) => ServerMessage::ack(of),
            Err(e) => e,
        })
    }

    fn hello(&mut self, client: ClientId, role: Role, console: Option<ConsoleId>) -> ServerMessage {
        if self.sessions.contains_key(&client) {
            return ServerMessage::error(ErrorCode::Invalid, "hello already received");
        }
        match (role, &console) {
            (Role::Console, None) => {
                return ServerMessage::error(ErrorCode::Invalid, "console role needs console_id")
            }
            (Role::Console, Some(c)) => {
                if !self.teleop.table().has_console(c) {
                    return ServerMessage::error(ErrorCode::UnknownId, format!("unknown console {c}"));
                }
                if self.sessions.values().any(|s| s.console.as_ref() == Some(c)) {
                    return ServerMessage::error(
                        ErrorCode::ConsoleTaken,
                        format!("{c} is bound to another client"),
                    );
                }
            }
            (Role::Observer, Some(_)) => {
                return ServerMessage::error(ErrorCode::Invalid, "observers do not take a console_id")
            }
            (Role::Observer, None) => {}
        }
        self.sessions.insert(
            client,
            Session {
                console: console.clone(),
            },
        );
        ServerMessage::Welcome {
            protocol_version: PROTOCOL_VERSION,
            client_id: client,
            role,
            console_id: console,
        }
    }

    fn console_request(&mut self, client: ClientId, msg: ClientMessage) -> Result<(), ServerMessage> {
        let console = self
            .sessions
            .get(&client)
            .and_then(|s| s.console.clone())
            .ok_or_else(|| ServerMessage::error(ErrorCode::NoSession, "send hello as a console first"))?;
        let teleop_err = |e: multiview_core::teleop::TeleopError| ServerMessage::error((&e).into(), e.to_string());
        match msg {
            ClientMessage::Input {
                master_side,
                pose_delta,
                clutch,
                grip,
            } => {
                if !pose_delta.is_finite() {
                    return Err(ServerMessage::error(ErrorCode::Invalid, "non-finite pose delta"));
                }
                let prev = self.master(&console, master_side);
                let next = MasterState {
                    pose: pose_delta.apply(&prev.pose),
                    clutch: clutch.unwrap_or(prev.clutch),
                    grip: grip.unwrap_or(prev.grip),
                };
                next.validate().map_err(teleop_err)?;
                self.masters.insert((console, master_side), next);
                Ok(())
            }
            ClientMessage::Engage { psm, side, on: true } => {
                let side = side
                    .or_else(|| self.teleop.free_side(&console, &psm))
                    .ok_or_else(|| ServerMessage::error(ErrorCode::Busy, "both masters are bound"))?;
                let master = self.master(&console, side);
                self.teleop
                    .engage(&console, side, &psm, &master, &self.world)
                    .map_err(teleop_err)
            }
            ClientMessage::Engage { psm, on: false, .. } => {
                self.teleop.disengage(&console, &psm).map_err(teleop_err)
            }
            ClientMessage::Routing { cmd } => self
                .teleop
                .apply_routing(&cmd.command(&console))
                .map_err(teleop_err),
            ClientMessage::CameraMode { on } => {
                let master = self.master(&console, CAMERA_MASTER);
                self.teleop
                    .set_camera_mode(&console, on, &master, &self.world)
                    .map_err(teleop_err)
            }
            ClientMessage::Hello { .. } | ClientMessage::Record { .. } | ClientMessage::SnapshotRequest => {
                unreachable!("handled by the caller")
            }
        }
    }

    fn record_request(
        &mut self,
        client: ClientId,
        action: RecordAction,
        path: Option<String>,
    ) -> Result<(), ServerMessage> {
        if !self.sessions.contains_key(&client) {
            return Err(ServerMessage::error(ErrorCode::NoSession, "send hello first"));
        }
        let fail = |e: ConductorError| ServerMessage::error(ErrorCode::Recording, e.to_string());
        match action {
            RecordAction::Start => {
                let path = path
                    .ok_or_else(|| ServerMessage::error(ErrorCode::Invalid, "record start needs a path"))?;
                self.start_recording(path).map_err(fail)
            }
            RecordAction::Stop => self.stop_recording().map(|_| ()).map_err(fail),
        }
    }

    fn disconnect(&mut self, client: ClientId) {
        if let Some(Session {
            console: Some(console),
        }) = self.sessions.remove(&client)
        {
            self.teleop.release_console(&console);
            self.masters.retain(|(c, _), _| c != &console);
        }
    }

    fn capture(&mut self, t: i64) {
        for (i, cam) in self.cameras.iter_mut().enumerate() {
            let slave = &self.slaves[cam.slave];
            let seq = cam.seq;
            cam.seq += 1;
            let Ok(frame) = synth_stereo(&cam.cfg.synth(), slave.clock(), t, seq) else {
                self.frames_rejected += 1;
                continue;
            };
            self.frames_captured += 1;
            // frames taken before the camera clock locks have no master time
            let Ok(ts) = slave.sync_state().to_master_time(frame.exposure_ts()) else {
                self.frames_rejected += 1;
                continue;
            };
            let aligner = self.aligner.as_mut().expect("aligner exists with cameras");
            match aligner.push(i, ts, seq) {
                Ok(groups) => {
                    self.tuples_aligned += groups.len() as u64;
                    self.window_tuples += groups.len() as u64;
                }
                Err(_) => self.frames_rejected += 1,
            }
            if let Some(rec) = self.recording.as_mut() {
                let payload =
                    FramePayload::from_frame(&frame, self.config.recording.record_pixels).encode();
                let ok = u64::try_from(ts)
                    .ok()
                    .and_then(|ts| rec.writer.append(camera_channel(i), ts, &payload).ok());
                match ok {
                    Some(_) => rec.records += 1,
                    None => rec.errors += 1,
                }
            }
        }
    }

    fn record_kinematics(&mut self, t: i64) {
        let Some(rec) = self.recording.as_mut() else {
            return;
        };
        let sample = KinematicsSample {
            arms: self
                .world
                .arms()
                .map(|(id, a)| ArmSample {
                    arm_id: self.arm_index[id],
                    joints: a.joints.0.clone(),
                    rotation: a.pose.rotation,
                    position: a.pose.translation,
                })
                .collect(),
        };
        let ts = u64::try_from(self.master_clock.local_time(t)).ok();
        let ok = match (ts, sample.encode()) {
            (Some(ts), Ok(payload)) => rec.writer.append(KINEMATICS_CHANNEL, ts, &payload).is_ok(),
            _ => false,
        };
        if ok {
            rec.records += 1;
        } else {
            rec.errors += 1;
        }
    }

    /// Channel layout of recordings made with this configuration.
    pub fn channels(&self) -> Vec<ChannelDescriptor> {
        let mut out = vec![ChannelDescriptor::new(
            KINEMATICS_CHANNEL,
            ChannelKind::Kinematics,
            "kinematics",
            self.config.kinematics_rate_hz as f64,
        )];
        for (i, c) in self.config.cameras.iter().enumerate() {
            out.push(ChannelDescriptor::new(
                camera_channel(i),
                ChannelKind::StereoFrame,
                &format!("stereo/{}", c.ecm),
                self.config.frame_rate_hz as f64,
            ));
        }
        out
    }

    pub fn start_recording(&mut self, path: impl AsRef<Path>) -> Result<(), ConductorError> {
        if self.recording.is_some() {
            return Err(ConductorError::Recording("already recording".into()));
        }
        let path = path.as_ref().to_path_buf();
        let writer = RecordWriter::create(&path, &self.channels())?;
        self.recording = Some(ActiveRecording {
            writer,
            path,
            records: 0,
            errors: 0,
        });
        Ok(())
    }

    /// Finalizes the active recording and returns its path.
    pub fn stop_recording(&mut self) -> Result<PathBuf, ConductorError> {
        let rec = self
            .recording
            .take()
            .ok_or_else(|| ConductorError::Recording("not recording".into()))?;
        self.last_recording = RecordingStatus {
            active: false,
            path: Some(rec.path.display().to_string()),
            records: rec.records,
            errors: rec.errors,
        };
        rec.writer.finalize()?;
        Ok(rec.path)
    }

    pub fn recording_status(&self) -> RecordingStatus {
        match &self.recording {
            Some(r) => RecordingStatus {
                active: true,
                path: Some(r.path.display().to_string()),
                records: r.records,
                errors: r.errors,
            },
            None => self.last_recording.clone(),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let table = self.teleop.table();
        let last = self.teleop.last_commands();
        Snapshot {
            arms: self
                .world
                .arms()
                .map(|(id, a)| ArmSnapshot {
                    id: id.clone(),
                    kind: a.model.kind,
                    joints: a.joints.0.clone(),
                    pose: a.pose,
                    rcm: a.model.base.translation,
                    frozen: last.arms.get(id).is_none_or(|c| c.frozen),
                    owner: table.owner_of(id).cloned(),
                    assigned_ecm: table.ecm_of(id).cloned(),
                    camera: self.camera_models.get(id).copied(),
                })
                .collect(),
            routing: RoutingSnapshot {
                psm_to_ecm: table.psm_to_ecm().clone(),
                console_views: table.console_views().clone(),
                ownership: table.ownership().clone(),
                max_arms_per_console: table.max_arms_per_console(),
            },
            engagement: self
                .teleop
                .pairs()
                .map(|p| Engagement {
                    console: p.console.clone(),
                    side: p.side,
                    psm: p.psm.clone(),
                })
                .collect(),
            camera_control: self
                .teleop
                .camera_controls()
                .map(|c| CameraHold {
                    console: c.console.clone(),
                    ecm: c.ecm.clone(),
                })
                .collect(),
        }
    }

    fn telemetry_at(&self, t: i64, fps: f64) -> Telemetry {
        let dropped = self
            .aligner
            .as_ref()
            .map_or(0, |a| a.dropped().iter().sum::<usize>() as u64);
        Telemetry {
            tick: self.tick,
            true_time_ns: t,
            slaves: self
                .slaves
                .iter()
                .map(|s| SlaveTelemetry {
                    id: s.id().to_owned(),
                    status: s.status(),
                    residual_ns: s.residual(&self.master_clock, t),
                })
                .collect(),
            photon_to_glass_ns: self.latency.photon_to_glass_ns,
            budget_ns: self.latency.budget_ns,
            within_budget: self.latency.within_budget,
            fps,
            frames_captured: self.frames_captured,
            tuples_aligned: self.tuples_aligned,
            frames_dropped: dropped + self.frames_rejected,
            recording_status: self.recording_status(),
        }
    }

    /// Telemetry for the current instant, outside the 10 Hz cadence.
    pub fn telemetry(&self) -> Telemetry {
        self.telemetry_at(self.true_time_ns(), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_spacing() {
        let ticks: Vec<u64> = (0..4).map(|n| schedule_tick(n, 1000, 30)).collect();
        assert_eq!(ticks, vec![0, 34, 67, 100]);
        assert_eq!(schedule_tick(30, 1000, 30), 1000);
        assert_eq!(schedule_tick(7, 1000, 1000), 7);
    }

    #[test]
    fn channel_layout() {
        let sim = Simulation::new(SimConfig::reference()).unwrap();
        let ch = sim.channels();
        assert_eq!(ch.len(), 3);
        assert_eq!(ch[0].kind, ChannelKind::Kinematics);
        assert_eq!(ch[1].name, "stereo/ECM1");
        assert_eq!(ch[2].id, 3);
    }
}
