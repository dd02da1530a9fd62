//! Multi-console, multi-viewpoint teleoperation.
//!
//! Each instrument (PSM) is teleoperated in the camera frame of the camera
//! arm (ECM) it is assigned to, independently of which view its console is
//! displaying. Consoles own at most `max_arms_per_console` instruments;
//! anything not owned and engaged stays frozen.

mod controller;
mod mapping;
mod routing;
mod world;

pub use controller::{
    ArmCommand, ArmFailure, CommandSet, MasterKey, Teleop, TeleopSettings, CAMERA_MASTER,
};
pub use mapping::{
    camera_law, engage, teleop_step, CameraControl, MasterSide, MasterState, TeleopPair, MAX_GRIP,
};
pub use routing::{RoutingCommand, RoutingTable, RoutingUpdate, DEFAULT_MAX_ARMS_PER_CONSOLE};
pub use world::{ArmState, WorldState};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::KinematicsError;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(ArmId);
string_id!(ConsoleId);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TeleopError {
    #[error("unknown arm {0}")]
    UnknownArm(ArmId),
    #[error("unknown console {0}")]
    UnknownConsole(ConsoleId),
    #[error("{psm} is owned by {owner}")]
    Owned { psm: ArmId, owner: ConsoleId },
    #[error("{console} already owns {limit} arms")]
    Capacity { console: ConsoleId, limit: usize },
    #[error("{console} does not own {psm}")]
    NotOwner { console: ConsoleId, psm: ArmId },
    #[error("master is clutched")]
    Clutched,
    #[error("{0} is not engaged")]
    NotEngaged(ArmId),
    #[error("{0} is already engaged by another master")]
    AlreadyEngaged(ArmId),
    #[error("{0:?} master is bound to another instrument")]
    SideBusy(MasterSide),
    #[error("camera {0} missing from world state")]
    MissingEcm(ArmId),
    #[error("{ecm} is steered by {holder}")]
    Arbitration { ecm: ArmId, holder: ConsoleId },
    #[error("{0} has no selected view")]
    NoView(ConsoleId),
    #[error("{0} is not in camera mode")]
    NotInCameraMode(ConsoleId),
    #[error("scale {0} outside (0, 1]")]
    InvalidScale(f64),
    #[error("invalid master state")]
    InvalidMaster,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
