//! JSON messages exchanged with live clients. Every object carries a
//! `"type"` discriminator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use multiview_core::clocksync::SyncStatus;
use multiview_core::kinematics::{ArmKind, CameraModel, RigidTransform, UnitQuat, Vec3};
use multiview_core::teleop::{ArmId, ConsoleId, MasterSide, RoutingCommand, TeleopError};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Drives masters; bound to one configured console.
    Console,
    /// Reads snapshots and telemetry; may control recording.
    Observer,
}

/// Incremental master motion in the console display frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDelta {
    #[serde(default)]
    pub translation: Vec3,
    /// Rotation vector, radians.
    #[serde(default)]
    pub rotation: Vec3,
}

impl PoseDelta {
    /// Moves `pose` by this delta: translation adds, rotation pre-multiplies.
    pub fn apply(&self, pose: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            UnitQuat::from_rotation_vector(self.rotation).compose(&pose.rotation),
            pose.translation + self.translation,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.translation.is_finite() && self.rotation.is_finite()
    }
}

/// Routing change requested by a client; the console is the client's own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RoutingRequest {
    AssignPsm { psm: ArmId, ecm: ArmId },
    SelectView { ecm: ArmId },
    AcquirePsm { psm: ArmId },
    ReleasePsm { psm: ArmId },
}

impl RoutingRequest {
    pub fn command(&self, console: &ConsoleId) -> RoutingCommand {
        let console = console.clone();
        match self.clone() {
            RoutingRequest::AssignPsm { psm, ecm } => RoutingCommand::AssignPsm { psm, ecm },
            RoutingRequest::SelectView { ecm } => RoutingCommand::SelectView { console, ecm },
            RoutingRequest::AcquirePsm { psm } => RoutingCommand::AcquirePsm { console, psm },
            RoutingRequest::ReleasePsm { psm } => RoutingCommand::ReleasePsm { console, psm },
        }
    }

    pub fn arms(&self) -> Vec<&ArmId> {
        match self {
            RoutingRequest::AssignPsm { psm, ecm } => vec![psm, ecm],
            RoutingRequest::SelectView { ecm } => vec![ecm],
            RoutingRequest::AcquirePsm { psm } | RoutingRequest::ReleasePsm { psm } => vec![psm],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordAction {
    Start,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        console_id: Option<ConsoleId>,
    },
    Input {
        master_side: MasterSide,
        #[serde(default)]
        pose_delta: PoseDelta,
        /// Unchanged when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clutch: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grip: Option<f64>,
    },
    Engage {
        psm: ArmId,
        /// Master to bind; the first free one (right, then left) if absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        side: Option<MasterSide>,
        /// `false` disengages.
        #[serde(default = "yes")]
        on: bool,
    },
    Routing {
        cmd: RoutingRequest,
    },
    CameraMode {
        on: bool,
    },
    Record {
        action: RecordAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    SnapshotRequest,
}

fn yes() -> bool {
    true
}

pub const CLIENT_TYPES: [&str; 7] = [
    "hello",
    "input",
    "engage",
    "routing",
    "camera_mode",
    "record",
    "snapshot_request",
];

impl ClientMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "hello",
            ClientMessage::Input { .. } => "input",
            ClientMessage::Engage { .. } => "engage",
            ClientMessage::Routing { .. } => "routing",
            ClientMessage::CameraMode { .. } => "camera_mode",
            ClientMessage::Record { .. } => "record",
            ClientMessage::SnapshotRequest => "snapshot_request",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not a JSON object with a string `type`.
    Parse,
    UnknownType,
    /// Well-formed type with bad or missing fields.
    Invalid,
    /// The message needs a console session (send hello first).
    NoSession,
    ConsoleTaken,
    UnknownId,
    Owned,
    Capacity,
    NotOwner,
    NotEngaged,
    Busy,
    Clutched,
    Arbitration,
    NoView,
    Kinematics,
    Recording,
    /// Transport-level violation; the connection is closed afterwards.
    Protocol,
}

impl From<&TeleopError> for ErrorCode {
    fn from(e: &TeleopError) -> Self {
        match e {
            TeleopError::UnknownArm(_)
            | TeleopError::UnknownConsole(_)
            | TeleopError::MissingEcm(_) => ErrorCode::UnknownId,
            TeleopError::Owned { .. } => ErrorCode::Owned,
            TeleopError::Capacity { .. } => ErrorCode::Capacity,
            TeleopError::NotOwner { .. } => ErrorCode::NotOwner,
            TeleopError::Clutched => ErrorCode::Clutched,
            TeleopError::NotEngaged(_) | TeleopError::NotInCameraMode(_) => ErrorCode::NotEngaged,
            TeleopError::AlreadyEngaged(_) | TeleopError::SideBusy(_) => ErrorCode::Busy,
            TeleopError::Arbitration { .. } => ErrorCode::Arbitration,
            TeleopError::NoView(_) => ErrorCode::NoView,
            TeleopError::InvalidScale(_) | TeleopError::InvalidMaster => ErrorCode::Invalid,
            TeleopError::Kinematics(_) => ErrorCode::Kinematics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSnapshot {
    pub id: ArmId,
    pub kind: ArmKind,
    pub joints: Vec<f64>,
    /// world <- tip (PSM) or world <- camera (ECM).
    pub pose: RigidTransform,
    /// Remote center, world coordinates.
    pub rcm: Vec3,
    pub frozen: bool,
    pub owner: Option<ConsoleId>,
    /// Camera frame a PSM is teleoperated in.
    pub assigned_ecm: Option<ArmId>,
    pub camera: Option<CameraModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSnapshot {
    pub psm_to_ecm: BTreeMap<ArmId, ArmId>,
    pub console_views: BTreeMap<ConsoleId, ArmId>,
    pub ownership: BTreeMap<ArmId, ConsoleId>,
    pub max_arms_per_console: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engagement {
    pub console: ConsoleId,
    pub side: MasterSide,
    pub psm: ArmId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraHold {
    pub console: ConsoleId,
    pub ecm: ArmId,
}

/// Full arm and routing state. Field order is fixed and maps are sorted,
/// so equal states serialize to equal bytes. Time lives in telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub arms: Vec<ArmSnapshot>,
    pub routing: RoutingSnapshot,
    pub engagement: Vec<Engagement>,
    pub camera_control: Vec<CameraHold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaveTelemetry {
    pub id: String,
    pub status: SyncStatus,
    pub residual_ns: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingStatus {
    pub active: bool,
    pub path: Option<String>,
    pub records: u64,
    pub errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub tick: u64,
    pub true_time_ns: i64,
    pub slaves: Vec<SlaveTelemetry>,
    pub photon_to_glass_ns: u64,
    pub budget_ns: u64,
    pub within_budget: bool,
    /// Aligned multi-camera tuples per simulated second over the last
    /// telemetry window.
    pub fps: f64,
    pub frames_captured: u64,
    pub tuples_aligned: u64,
    pub frames_dropped: u64,
    pub recording_status: RecordingStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome {
        protocol_version: u32,
        client_id: u64,
        role: Role,
        console_id: Option<ConsoleId>,
    },
    Ack {
        of: String,
    },
    Snapshot(Snapshot),
    Telemetry(Telemetry),
    Error {
        code: ErrorCode,
        detail: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            detail: detail.into(),
        }
    }

    pub fn ack(of: &str) -> Self {
        ServerMessage::Ack { of: of.to_owned() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Parses one client frame, classifying failures into wire error codes.
pub fn parse_client(text: &str) -> Result<ClientMessage, ServerMessage> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ServerMessage::error(ErrorCode::Parse, e.to_string()))?;
    let Some(ty) = value.get("type").and_then(|t| t.as_str()) else {
        return Err(ServerMessage::error(
            ErrorCode::Parse,
            "expected an object with a string \"type\"",
        ));
    };
    if !CLIENT_TYPES.contains(&ty) {
        return Err(ServerMessage::error(
            ErrorCode::UnknownType,
            format!("unknown message type {ty:?}"),
        ));
    }
    serde_json::from_value(value).map_err(|e| ServerMessage::error(ErrorCode::Invalid, e.to_string()))
}
