use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use multiview_core::clocksync::{LinkModel, ServoState, SimClock, SlaveConfig};
use multiview_core::kinematics::{
    ArmKind, ArmModel, CameraModel, JointLimit, JointVector, RigidTransform, UnitQuat, Vec3,
};
use multiview_core::pipeline::{latency_report, StageLatency, SynthConfig, DEFAULT_BUDGET_NS};
use multiview_core::teleop::{
    ArmId, ConsoleId, RoutingTable, TeleopSettings, DEFAULT_MAX_ARMS_PER_CONSOLE,
};

use crate::ConductorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub id: ArmId,
    pub kind: ArmKind,
    /// world <- base; the remote center sits at its origin.
    pub base: RigidTransform,
    #[serde(default)]
    pub tool_offset: RigidTransform,
    /// Defaults to the kind's standard limits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_limits: Option<Vec<JointLimit>>,
    /// Initial joint values.
    pub home: Vec<f64>,
    /// Endoscope optics. ECMs only; defaults to the standard model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraModel>,
}

impl ArmConfig {
    pub fn model(&self) -> ArmModel {
        ArmModel {
            kind: self.kind,
            base: self.base,
            tool_offset: self.tool_offset,
            joint_limits: self
                .joint_limits
                .clone()
                .unwrap_or_else(|| self.kind.default_limits()),
        }
    }

    pub fn camera_model(&self) -> Option<CameraModel> {
        (self.kind == ArmKind::Ecm).then(|| self.camera.unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    pub psm_to_ecm: BTreeMap<ArmId, ArmId>,
    /// Initial view of each console.
    #[serde(default)]
    pub views: BTreeMap<ConsoleId, ArmId>,
    #[serde(default = "default_max_arms")]
    pub max_arms_per_console: usize,
}

fn default_max_arms() -> usize {
    DEFAULT_MAX_ARMS_PER_CONSOLE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleopConfig {
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_cam_scale")]
    pub cam_scale: f64,
}

fn default_scale() -> f64 {
    TeleopSettings::default().scale
}

fn default_cam_scale() -> f64 {
    TeleopSettings::default().cam_scale
}

impl Default for TeleopConfig {
    fn default() -> Self {
        TeleopConfig {
            scale: default_scale(),
            cam_scale: default_cam_scale(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoGains {
    pub kp: f64,
    pub ki: f64,
}

impl Default for ServoGains {
    fn default() -> Self {
        let s = ServoState::default();
        ServoGains { kp: s.kp, ki: s.ki }
    }
}

/// Clock topology: one master (the switch) and one slave per device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    #[serde(default)]
    pub master: SimClock,
    #[serde(default = "default_interval")]
    pub sync_interval_s: f64,
    #[serde(default)]
    pub servo: ServoGains,
    #[serde(default)]
    pub slaves: Vec<SlaveConfig>,
}

fn default_interval() -> f64 {
    0.1
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            master: SimClock::ideal(),
            sync_interval_s: default_interval(),
            servo: ServoGains::default(),
            slaves: Vec::new(),
        }
    }
}

/// A stereo endoscope camera mounted on an ECM and stamped by a slave clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub ecm: ArmId,
    /// Id of the slave clock that timestamps this camera.
    pub clock: String,
    pub stream_id: u16,
    /// Per-eye resolution.
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_depth")]
    pub bit_depth: u8,
}

fn default_depth() -> u8 {
    8
}

impl CameraConfig {
    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            width: self.width,
            height: self.height,
            bit_depth: self.bit_depth,
            stream_id: self.stream_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "StageLatency::illustrative")]
    pub stages: StageLatency,
    #[serde(default = "default_budget")]
    pub budget_ns: u64,
    /// Alignment window; half a frame period when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_ns: Option<i64>,
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET_NS
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: StageLatency::illustrative(),
            budget_ns: DEFAULT_BUDGET_NS,
            tolerance_ns: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordingConfig {
    /// Store raw Bayer samples instead of only their checksums.
    #[serde(default)]
    pub record_pixels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tick_rate")]
    pub tick_rate_hz: u32,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: u32,
    #[serde(default = "default_kinematics_rate")]
    pub kinematics_rate_hz: u32,
    pub arms: Vec<ArmConfig>,
    pub consoles: Vec<ConsoleId>,
    pub routing: RoutingConfig,
    #[serde(default)]
    pub teleop: TeleopConfig,
    #[serde(default)]
    pub clock: ClockConfig,
    #[serde(default)]
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub recording: RecordingConfig,
}

fn default_tick_rate() -> u32 {
    1000
}

fn default_frame_rate() -> u32 {
    30
}

fn default_kinematics_rate() -> u32 {
    200
}

fn invalid(msg: impl Into<String>) -> ConductorError {
    ConductorError::Config(msg.into())
}

fn unique<'a, T: Ord + std::fmt::Display + 'a>(
    what: &str,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<BTreeSet<&'a T>, ConductorError> {
    let mut seen = BTreeSet::new();
    for it in items {
        if !seen.insert(it) {
            return Err(invalid(format!("{what} {it} defined more than once")));
        }
    }
    Ok(seen)
}

impl SimConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConductorError> {
        let text = fs::read_to_string(path)?;
        let cfg: SimConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tick_ns(&self) -> i64 {
        1_000_000_000 / self.tick_rate_hz as i64
    }

    pub fn sync_interval_ticks(&self) -> u64 {
        ((self.clock.sync_interval_s * 1e9).round() as i64 / self.tick_ns()) as u64
    }

    pub fn teleop_settings(&self) -> TeleopSettings {
        TeleopSettings {
            scale: self.teleop.scale,
            cam_scale: self.teleop.cam_scale,
            ..TeleopSettings::default()
        }
    }

    pub fn servo(&self) -> Result<ServoState, ConductorError> {
        Ok(ServoState::new(self.clock.servo.kp, self.clock.servo.ki)?)
    }

    pub fn arm(&self, id: &ArmId) -> Option<&ArmConfig> {
        self.arms.iter().find(|a| &a.id == id)
    }

    pub fn is_kind(&self, id: &ArmId, kind: ArmKind) -> bool {
        self.arm(id).is_some_and(|a| a.kind == kind)
    }

    pub fn routing_table(&self) -> Result<RoutingTable, ConductorError> {
        let ecms = self
            .arms
            .iter()
            .filter(|a| a.kind == ArmKind::Ecm)
            .map(|a| a.id.clone())
            .collect();
        let consoles = self.consoles.iter().cloned().collect();
        let mut table = RoutingTable::new(
            self.routing.psm_to_ecm.clone(),
            ecms,
            consoles,
            self.routing.max_arms_per_console,
        )?;
        for (console, ecm) in &self.routing.views {
            table = table
                .apply(&multiview_core::teleop::RoutingCommand::SelectView {
                    console: console.clone(),
                    ecm: ecm.clone(),
                })?
                .table;
        }
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), ConductorError> {
        let tick = self.tick_rate_hz;
        if tick == 0 || 1_000_000_000 % tick != 0 || !tick.is_multiple_of(10) {
            return Err(invalid("tick_rate_hz must divide 1e9 and be a multiple of 10"));
        }
        if self.frame_rate_hz == 0 || self.frame_rate_hz > tick {
            return Err(invalid("frame_rate_hz must be in 1..=tick_rate_hz"));
        }
        if self.kinematics_rate_hz == 0 || self.kinematics_rate_hz > tick {
            return Err(invalid("kinematics_rate_hz must be in 1..=tick_rate_hz"));
        }
        let s = self.teleop.scale;
        if !(s > 0.0 && s <= 1.0) || !(self.teleop.cam_scale > 0.0) {
            return Err(invalid("teleop scales out of range"));
        }

        let arm_ids = unique("arm", self.arms.iter().map(|a| &a.id))?;
        for a in &self.arms {
            if a.home.len() != a.kind.joint_count() {
                return Err(invalid(format!(
                    "{}: home needs {} joints",
                    a.id,
                    a.kind.joint_count()
                )));
            }
            a.model()
                .fk(&JointVector(a.home.clone()))
                .map_err(|e| invalid(format!("{}: {e}", a.id)))?;
            if let Some(cam) = a.camera_model() {
                cam.validate().map_err(|e| invalid(format!("{}: {e}", a.id)))?;
            }
        }
        unique("console", &self.consoles)?;

        for (psm, ecm) in &self.routing.psm_to_ecm {
            if !self.is_kind(psm, ArmKind::Psm) {
                return Err(invalid(format!("routing: {psm} is not a PSM")));
            }
            if !self.is_kind(ecm, ArmKind::Ecm) {
                return Err(invalid(format!("routing: {ecm} is not an ECM")));
            }
        }
        for a in self.arms.iter().filter(|a| a.kind == ArmKind::Psm) {
            if !self.routing.psm_to_ecm.contains_key(&a.id) {
                return Err(invalid(format!("routing: {} has no camera frame", a.id)));
            }
        }
        for (console, ecm) in &self.routing.views {
            if !self.consoles.contains(console) || !self.is_kind(ecm, ArmKind::Ecm) {
                return Err(invalid(format!("routing: bad view {console} -> {ecm}")));
            }
        }
        self.routing_table()?;

        let interval_ns = (self.clock.sync_interval_s * 1e9).round() as i64;
        if !(self.clock.sync_interval_s > 0.0)
            || interval_ns < self.tick_ns()
            || interval_ns % self.tick_ns() != 0
        {
            return Err(invalid("sync_interval_s must be a whole number of ticks"));
        }
        self.clock.master.validate()?;
        self.servo()?;
        let slaves = unique("clock", self.clock.slaves.iter().map(|s| &s.id))?;
        for s in &self.clock.slaves {
            s.clock.validate()?;
            s.link.validate()?;
        }

        unique("camera stream", self.cameras.iter().map(|c| &c.stream_id))?;
        unique("camera on", self.cameras.iter().map(|c| &c.ecm))?;
        for c in &self.cameras {
            if !arm_ids.contains(&c.ecm) || !self.is_kind(&c.ecm, ArmKind::Ecm) {
                return Err(invalid(format!("camera: {} is not an ECM", c.ecm)));
            }
            if !slaves.contains(&c.clock) {
                return Err(invalid(format!("camera: unknown clock {}", c.clock)));
            }
            c.synth().validate()?;
        }
        if self.arms.len() > u8::MAX as usize {
            return Err(invalid("at most 255 arms"));
        }
        if let Some(t) = self.pipeline.tolerance_ns {
            if t < 0 {
                return Err(invalid("negative alignment tolerance"));
            }
        }
        latency_report(&self.pipeline.stages, self.pipeline.budget_ns)?;
        Ok(())
    }

    /// Two camera arms, two instrument arms, two consoles, one stereo
    /// camera per ECM at 640x480 per eye.
    pub fn reference() -> Self {
        let down = UnitQuat::rot_x(std::f64::consts::PI);
        let tilted = UnitQuat::rot_x(std::f64::consts::PI - 0.35);
        let arm = |id: &str, kind: ArmKind, rot: UnitQuat, at: [f64; 3], home: Vec<f64>| ArmConfig {
            id: ArmId::from(id),
            kind,
            base: RigidTransform::new(rot, Vec3::from(at)),
            tool_offset: RigidTransform::IDENTITY,
            joint_limits: None,
            home,
            camera: None,
        };
        let slave = |id: &str, offset: i64, drift: f64, seed: u64| SlaveConfig {
            id: id.to_owned(),
            clock: SimClock {
                offset0_ns: offset,
                drift_ppm: drift,
                seed,
                ..SimClock::ideal()
            },
            link: LinkModel::symmetric(10_000, 200.0),
        };
        let camera = |ecm: &str, clock: &str, stream_id: u16| CameraConfig {
            ecm: ArmId::from(ecm),
            clock: clock.to_owned(),
            stream_id,
            width: 640,
            height: 480,
            bit_depth: 8,
        };
        SimConfig {
            seed: 1,
            tick_rate_hz: 1000,
            frame_rate_hz: 30,
            kinematics_rate_hz: 200,
            arms: vec![
                arm("ECM1", ArmKind::Ecm, down, [0.0, -0.02, 0.12], vec![0.0, 0.0, 0.04, 0.0]),
                arm("ECM2", ArmKind::Ecm, tilted, [0.0, 0.06, 0.11], vec![0.0, 0.0, 0.04, 0.0]),
                arm(
                    "PSM1",
                    ArmKind::Psm,
                    down,
                    [-0.05, 0.0, 0.12],
                    vec![0.3, 0.0, 0.12, 0.0, 0.0, 0.0, 0.3],
                ),
                arm(
                    "PSM2",
                    ArmKind::Psm,
                    down,
                    [0.05, 0.0, 0.12],
                    vec![-0.3, 0.0, 0.12, 0.0, 0.0, 0.0, 0.3],
                ),
            ],
            consoles: vec![ConsoleId::from("console1"), ConsoleId::from("console2")],
            routing: RoutingConfig {
                psm_to_ecm: [("PSM1", "ECM1"), ("PSM2", "ECM2")]
                    .into_iter()
                    .map(|(p, e)| (ArmId::from(p), ArmId::from(e)))
                    .collect(),
                views: [("console1", "ECM1"), ("console2", "ECM2")]
                    .into_iter()
                    .map(|(c, e)| (ConsoleId::from(c), ArmId::from(e)))
                    .collect(),
                max_arms_per_console: DEFAULT_MAX_ARMS_PER_CONSOLE,
            },
            teleop: TeleopConfig::default(),
            clock: ClockConfig {
                slaves: vec![
                    slave("cam-ECM1", 25_000, 30.0, 11),
                    slave("cam-ECM2", -40_000, -45.0, 12),
                ],
                ..ClockConfig::default()
            },
            cameras: vec![camera("ECM1", "cam-ECM1", 1), camera("ECM2", "cam-ECM2", 2)],
            pipeline: PipelineConfig::default(),
            recording: RecordingConfig::default(),
        }
    }
}
