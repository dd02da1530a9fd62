//! Deterministic fixed-step simulation of the multi-viewpoint robot, the
//! live client service and the tooling behind the `multiview` command.
//!
//! A [`Simulation`] owns every module state. Each tick applies queued
//! client messages, resolves teleoperation commands, runs clock
//! synchronization exchanges, captures frames on frame ticks, aligns them
//! and, when active, records kinematics and frames.

pub mod config;
pub mod headless;
pub mod protocol;
pub mod serve;
pub mod sim;
pub mod tools;

pub use config::SimConfig;
pub use headless::{run_headless, HeadlessReport, Script, ScriptEvent};
pub use protocol::{ClientMessage, ErrorCode, ServerMessage, Snapshot, Telemetry, PROTOCOL_VERSION};
pub use sim::{ClientId, Inbound, Simulation, StepOutput};

use thiserror::Error;

use multiview_core::clocksync::ClockSyncError;
use multiview_core::kinematics::KinematicsError;
use multiview_core::pipeline::PipelineError;
use multiview_core::recorder::RecorderError;
use multiview_core::teleop::TeleopError;

#[derive(Debug, Error)]
pub enum ConductorError {
    #[error("config: {0}")]
    Config(String),
    #[error("script: {0}")]
    Script(String),
    #[error("recording: {0}")]
    Recording(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Recorder(#[from] RecorderError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    ClockSync(#[from] ClockSyncError),
    #[error(transparent)]
    Teleop(#[from] TeleopError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
