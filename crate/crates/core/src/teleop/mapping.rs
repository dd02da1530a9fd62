use serde::{Deserialize, Serialize};

use crate::kinematics::{RigidTransform, UnitQuat};

use super::routing::RoutingTable;
use super::world::WorldState;
use super::{ArmId, ConsoleId, TeleopError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterSide {
    Left,
    Right,
}

pub const MAX_GRIP: f64 = 1.2;

/// One master handle of a console. `pose` is in the console display frame,
/// whose axes coincide with the viewed camera's axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterState {
    pub pose: RigidTransform,
    pub clutch: bool,
    pub grip: f64,
}

impl Default for MasterState {
    fn default() -> Self {
        MasterState {
            pose: RigidTransform::IDENTITY,
            clutch: false,
            grip: 0.0,
        }
    }
}

impl MasterState {
    pub fn validate(&self) -> Result<(), TeleopError> {
        if !self.pose.is_finite() || !(0.0..=MAX_GRIP).contains(&self.grip) {
            return Err(TeleopError::InvalidMaster);
        }
        Ok(())
    }
}

/// A master handle bound to one instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleopPair {
    pub console: ConsoleId,
    pub side: MasterSide,
    pub psm: ArmId,
    pub scale: f64,
    pub engaged: bool,
    pub engage_master_pose: RigidTransform,
    /// Tip pose expressed in the assigned camera frame at the anchor.
    pub engage_tip_pose_cam: RigidTransform,
    pub orientation_offset: UnitQuat,
    /// Camera pose the anchors were taken against.
    anchor_camera: RigidTransform,
    last_master: RigidTransform,
    last_command: RigidTransform,
}

impl TeleopPair {
    pub fn new(
        console: ConsoleId,
        side: MasterSide,
        psm: ArmId,
        scale: f64,
    ) -> Result<Self, TeleopError> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(TeleopError::InvalidScale(scale));
        }
        Ok(TeleopPair {
            console,
            side,
            psm,
            scale,
            engaged: false,
            engage_master_pose: RigidTransform::IDENTITY,
            engage_tip_pose_cam: RigidTransform::IDENTITY,
            orientation_offset: UnitQuat::IDENTITY,
            anchor_camera: RigidTransform::IDENTITY,
            last_master: RigidTransform::IDENTITY,
            last_command: RigidTransform::IDENTITY,
        })
    }

    /// Last commanded tip pose in world coordinates.
    pub fn last_command(&self) -> &RigidTransform {
        &self.last_command
    }

    fn anchor(&mut self, master: &RigidTransform, tip_world: &RigidTransform, cam: &RigidTransform) {
        let tip_cam = cam.inverse().compose(tip_world);
        self.engage_master_pose = *master;
        self.engage_tip_pose_cam = tip_cam;
        self.orientation_offset = tip_cam.rotation.compose(&master.rotation.inverse());
        self.anchor_camera = *cam;
        self.last_master = *master;
        self.last_command = *tip_world;
    }
}

fn assigned_camera<'a>(
    psm: &ArmId,
    table: &RoutingTable,
    world: &'a WorldState,
) -> Result<&'a RigidTransform, TeleopError> {
    let ecm = table
        .ecm_of(psm)
        .ok_or_else(|| TeleopError::UnknownArm(psm.clone()))?;
    world
        .pose(ecm)
        .ok_or_else(|| TeleopError::MissingEcm(ecm.clone()))
}

/// Records the anchors that make the first step jump-free.
pub fn engage(
    pair: &TeleopPair,
    table: &RoutingTable,
    master: &MasterState,
    world: &WorldState,
) -> Result<TeleopPair, TeleopError> {
    if master.clutch {
        return Err(TeleopError::Clutched);
    }
    master.validate()?;
    if table.owner_of(&pair.psm) != Some(&pair.console) {
        return Err(TeleopError::NotOwner {
            console: pair.console.clone(),
            psm: pair.psm.clone(),
        });
    }
    let cam = assigned_camera(&pair.psm, table, world)?;
    let tip = world
        .pose(&pair.psm)
        .ok_or_else(|| TeleopError::UnknownArm(pair.psm.clone()))?;
    let mut out = pair.clone();
    out.anchor(&master.pose, tip, cam);
    out.engaged = true;
    Ok(out)
}

/// Camera-frame incremental mapping from master motion to a world tip pose.
///
/// Position: `p_cam = p_cam0 + scale * (p_master - p_master0)`.
/// Orientation: `R_cam = offset * R_master`. The result is `C * tip_cam` with
/// `C` the assigned camera's current pose. While clutched the previous
/// command is returned and the anchors follow the master. If the camera has
/// moved since the anchors were taken they are re-taken against the new
/// camera pose, so camera motion never drags the instrument.
pub fn teleop_step(
    pair: &mut TeleopPair,
    table: &RoutingTable,
    master: &MasterState,
    world: &WorldState,
) -> Result<RigidTransform, TeleopError> {
    if !pair.engaged {
        return Err(TeleopError::NotEngaged(pair.psm.clone()));
    }
    let cam = *assigned_camera(&pair.psm, table, world)?;
    if master.clutch {
        let last = pair.last_command;
        pair.anchor(&master.pose, &last, &cam);
        return Ok(last);
    }
    if cam != pair.anchor_camera {
        let (m, last) = (pair.last_master, pair.last_command);
        pair.anchor(&m, &last, &cam);
    }

    let delta = master.pose.translation - pair.engage_master_pose.translation;
    let tip_cam = RigidTransform::new(
        pair.orientation_offset.compose(&master.pose.rotation),
        pair.engage_tip_pose_cam.translation + delta * pair.scale,
    );
    let cmd = cam.compose(&tip_cam);
    pair.last_master = master.pose;
    pair.last_command = cmd;
    Ok(cmd)
}

/// Camera steering state of one console.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraControl {
    pub console: ConsoleId,
    pub ecm: ArmId,
    pub cam_scale: f64,
    last_master: RigidTransform,
    last_command: RigidTransform,
}

impl CameraControl {
    pub fn new(
        console: ConsoleId,
        ecm: ArmId,
        cam_scale: f64,
        master: &MasterState,
        camera_pose: RigidTransform,
    ) -> Self {
        CameraControl {
            console,
            ecm,
            cam_scale,
            last_master: master.pose,
            last_command: camera_pose,
        }
    }

    pub fn last_command(&self) -> &RigidTransform {
        &self.last_command
    }
}

/// "Grab the scene" camera law: the camera moves opposite to the hand,
/// expressed in the camera's current axes, and rotates by the inverse of
/// the hand rotation about its own center.
pub fn camera_law(
    camera: &RigidTransform,
    previous_master: &RigidTransform,
    master: &RigidTransform,
    cam_scale: f64,
) -> RigidTransform {
    let dp = master.translation - previous_master.translation;
    let dr = master
        .rotation
        .compose(&previous_master.rotation.inverse())
        .to_rotation_vector();
    let turn = UnitQuat::from_rotation_vector(dr * -cam_scale);
    RigidTransform::new(
        camera.rotation.compose(&turn),
        camera.translation + camera.rotation.rotate(dp * -cam_scale),
    )
}

pub(crate) fn camera_step_inner(
    ctrl: &mut CameraControl,
    master: &MasterState,
    world: &WorldState,
) -> Result<RigidTransform, TeleopError> {
    let camera = *world
        .pose(&ctrl.ecm)
        .ok_or_else(|| TeleopError::MissingEcm(ctrl.ecm.clone()))?;
    if master.clutch {
        ctrl.last_master = master.pose;
        return Ok(ctrl.last_command);
    }
    let cmd = camera_law(&camera, &ctrl.last_master, &master.pose, ctrl.cam_scale);
    ctrl.last_master = master.pose;
    ctrl.last_command = cmd;
    Ok(cmd)
}
