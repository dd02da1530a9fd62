use std::collections::BTreeMap;

use crate::kinematics::{diff_ik, IkParams, JointVector, KinematicsError, RigidTransform};

use super::mapping::{
    camera_step_inner, engage, teleop_step, CameraControl, MasterSide, MasterState, TeleopPair,
};
use super::routing::{RoutingCommand, RoutingTable};
use super::world::WorldState;
use super::{ArmId, ConsoleId, TeleopError};

/// The master that steers the camera while a console is in camera mode.
pub const CAMERA_MASTER: MasterSide = MasterSide::Right;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopSettings {
    /// Master-to-instrument motion scale, in (0, 1].
    pub scale: f64,
    /// Master-to-camera motion scale.
    pub cam_scale: f64,
    pub ik: IkParams,
}

impl Default for TeleopSettings {
    fn default() -> Self {
        TeleopSettings {
            scale: 0.25,
            cam_scale: 1.0,
            ik: IkParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmCommand {
    /// Commanded world pose of the tip (PSM) or camera (ECM).
    pub target: RigidTransform,
    pub joints: JointVector,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmFailure {
    pub arm: ArmId,
    pub reason: String,
}

/// Per-arm output of one control tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandSet {
    pub arms: BTreeMap<ArmId, ArmCommand>,
    pub failures: Vec<ArmFailure>,
}

impl CommandSet {
    /// Every arm frozen at its current pose.
    pub fn hold(world: &WorldState) -> Self {
        CommandSet {
            arms: world
                .arms()
                .map(|(id, a)| {
                    (
                        id.clone(),
                        ArmCommand {
                            target: a.pose,
                            joints: a.joints.clone(),
                            frozen: true,
                        },
                    )
                })
                .collect(),
            failures: Vec::new(),
        }
    }
}

pub type MasterKey = (ConsoleId, MasterSide);

/// Single-writer teleoperation state machine.
#[derive(Debug, Clone)]
pub struct Teleop {
    table: RoutingTable,
    pairs: BTreeMap<MasterKey, TeleopPair>,
    camera: BTreeMap<ConsoleId, CameraControl>,
    settings: TeleopSettings,
    last: CommandSet,
}

impl Teleop {
    pub fn new(table: RoutingTable, settings: TeleopSettings, world: &WorldState) -> Self {
        Teleop {
            table,
            pairs: BTreeMap::new(),
            camera: BTreeMap::new(),
            settings,
            last: CommandSet::hold(world),
        }
    }

    pub fn table(&self) -> &RoutingTable {
        &self.table
    }

    pub fn settings(&self) -> &TeleopSettings {
        &self.settings
    }

    pub fn pairs(&self) -> impl Iterator<Item = &TeleopPair> {
        self.pairs.values()
    }

    pub fn camera_controls(&self) -> impl Iterator<Item = &CameraControl> {
        self.camera.values()
    }

    pub fn last_commands(&self) -> &CommandSet {
        &self.last
    }

    fn drop_psm(&mut self, psm: &ArmId) {
        self.pairs.retain(|_, p| &p.psm != psm);
    }

    pub fn apply_routing(&mut self, cmd: &RoutingCommand) -> Result<(), TeleopError> {
        let update = self.table.apply(cmd)?;
        self.table = update.table;
        if let Some(psm) = update.invalidated {
            self.drop_psm(&psm);
        }
        if let RoutingCommand::SelectView { console, ecm } = cmd {
            if self.camera.get(console).is_some_and(|c| &c.ecm != ecm) {
                self.camera.remove(console);
            }
        }
        Ok(())
    }

    /// Binds `side` of `console` to `psm` and engages it.
    pub fn engage(
        &mut self,
        console: &ConsoleId,
        side: MasterSide,
        psm: &ArmId,
        master: &MasterState,
        world: &WorldState,
    ) -> Result<(), TeleopError> {
        if !self.table.has_console(console) {
            return Err(TeleopError::UnknownConsole(console.clone()));
        }
        if !self.table.is_psm(psm) {
            return Err(TeleopError::UnknownArm(psm.clone()));
        }
        if self.table.owner_of(psm) != Some(console) {
            return Err(TeleopError::NotOwner {
                console: console.clone(),
                psm: psm.clone(),
            });
        }
        let key = (console.clone(), side);
        if let Some(p) = self.pairs.get(&key) {
            if &p.psm != psm {
                return Err(TeleopError::SideBusy(side));
            }
        }
        if self
            .pairs
            .iter()
            .any(|(k, p)| &p.psm == psm && k != &key)
        {
            return Err(TeleopError::AlreadyEngaged(psm.clone()));
        }
        let pair = TeleopPair::new(console.clone(), side, psm.clone(), self.settings.scale)?;
        let pair = engage(&pair, &self.table, master, world)?;
        self.pairs.insert(key, pair);
        Ok(())
    }

    pub fn disengage(&mut self, console: &ConsoleId, psm: &ArmId) -> Result<(), TeleopError> {
        let before = self.pairs.len();
        self.pairs
            .retain(|(c, _), p| !(c == console && &p.psm == psm));
        if self.pairs.len() == before {
            return Err(TeleopError::NotEngaged(psm.clone()));
        }
        Ok(())
    }

    /// Free side for a new engagement: right first, then left.
    pub fn free_side(&self, console: &ConsoleId, psm: &ArmId) -> Option<MasterSide> {
        [MasterSide::Right, MasterSide::Left].into_iter().find(|s| {
            self.pairs
                .get(&(console.clone(), *s))
                .is_none_or(|p| &p.psm == psm)
        })
    }

    pub fn set_camera_mode(
        &mut self,
        console: &ConsoleId,
        on: bool,
        master: &MasterState,
        world: &WorldState,
    ) -> Result<(), TeleopError> {
        if !self.table.has_console(console) {
            return Err(TeleopError::UnknownConsole(console.clone()));
        }
        if !on {
            self.camera.remove(console);
            return Ok(());
        }
        let ecm = self
            .table
            .view_of(console)
            .ok_or_else(|| TeleopError::NoView(console.clone()))?
            .clone();
        if let Some(holder) = self.camera_holder(&ecm) {
            if holder != console {
                return Err(TeleopError::Arbitration {
                    ecm,
                    holder: holder.clone(),
                });
            }
            return Ok(());
        }
        let pose = *world
            .pose(&ecm)
            .ok_or_else(|| TeleopError::MissingEcm(ecm.clone()))?;
        self.camera.insert(
            console.clone(),
            CameraControl::new(console.clone(), ecm, self.settings.cam_scale, master, pose),
        );
        Ok(())
    }

    pub fn camera_holder(&self, ecm: &ArmId) -> Option<&ConsoleId> {
        self.camera
            .values()
            .find(|c| &c.ecm == ecm)
            .map(|c| &c.console)
    }

    pub fn in_camera_mode(&self, console: &ConsoleId) -> bool {
        self.camera.contains_key(console)
    }

    /// One camera-mode step for `console` on its selected view.
    pub fn camera_step(
        &mut self,
        console: &ConsoleId,
        master: &MasterState,
        world: &WorldState,
    ) -> Result<RigidTransform, TeleopError> {
        let ecm = self
            .table
            .view_of(console)
            .ok_or_else(|| TeleopError::NoView(console.clone()))?
            .clone();
        if let Some(holder) = self.camera_holder(&ecm) {
            if holder != console {
                return Err(TeleopError::Arbitration {
                    ecm,
                    holder: holder.clone(),
                });
            }
        }
        let ctrl = self
            .camera
            .get_mut(console)
            .ok_or_else(|| TeleopError::NotInCameraMode(console.clone()))?;
        camera_step_inner(ctrl, master, world)
    }

    /// Releases everything a console holds; its arms freeze.
    pub fn release_console(&mut self, console: &ConsoleId) -> Vec<ArmId> {
        let released = self.table.release_console(console);
        self.pairs.retain(|(c, _), _| c != console);
        self.camera.remove(console);
        released
    }

    /// Computes this tick's command for every arm.
    ///
    /// Engaged instruments follow their masters; camera-mode ECMs follow
    /// their console. Everything else repeats its previous command verbatim.
    /// A failing arm is frozen and reported.
    pub fn resolve_commands(
        &mut self,
        masters: &BTreeMap<MasterKey, MasterState>,
        world: &WorldState,
    ) -> CommandSet {
        let mut out = CommandSet {
            arms: self.last.arms.clone(),
            failures: Vec::new(),
        };
        for cmd in out.arms.values_mut() {
            cmd.frozen = true;
        }
        let default_master = MasterState::default();

        let keys: Vec<MasterKey> = self.pairs.keys().cloned().collect();
        for key in keys {
            let owner_ok = {
                let p = &self.pairs[&key];
                self.table.owner_of(&p.psm) == Some(&p.console)
            };
            if !owner_ok {
                self.pairs.remove(&key);
                continue;
            }
            let mut master = *masters.get(&key).unwrap_or(&default_master);
            // a console steering its camera holds its instruments
            if self.camera.contains_key(&key.0) {
                master.clutch = true;
            }
            let pair = self.pairs.get_mut(&key).expect("key from map");
            let psm = pair.psm.clone();
            let result = teleop_step(pair, &self.table, &master, world)
                .and_then(|target| {
                    let arm = world
                        .arm(&psm)
                        .ok_or_else(|| TeleopError::UnknownArm(psm.clone()))?;
                    let prev = &self.last.arms[&psm];
                    if prev.target == target {
                        return Ok((target, prev.joints.clone()));
                    }
                    let sol = diff_ik(&arm.model, &target, &arm.joints, &self.settings.ik)?;
                    Ok((target, sol.joints))
                });
            match result {
                Ok((target, joints)) => {
                    out.arms.insert(
                        psm,
                        ArmCommand {
                            target,
                            joints,
                            frozen: false,
                        },
                    );
                }
                Err(e) => out.failures.push(ArmFailure {
                    arm: psm,
                    reason: e.to_string(),
                }),
            }
        }

        let consoles: Vec<ConsoleId> = self.camera.keys().cloned().collect();
        for console in consoles {
            let master = *masters
                .get(&(console.clone(), CAMERA_MASTER))
                .unwrap_or(&default_master);
            let ctrl = self.camera.get_mut(&console).expect("key from map");
            let ecm = ctrl.ecm.clone();
            let result = camera_step_inner(ctrl, &master, world).and_then(|target| {
                let arm = world
                    .arm(&ecm)
                    .ok_or_else(|| TeleopError::MissingEcm(ecm.clone()))?;
                let prev = &self.last.arms[&ecm];
                if prev.target == target {
                    return Ok((target, prev.joints.clone()));
                }
                // 4 joints cannot realize every camera pose: take the
                // least-squares best effort
                let joints = match diff_ik(&arm.model, &target, &arm.joints, &self.settings.ik) {
                    Ok(sol) => sol.joints,
                    Err(KinematicsError::NotConverged { best, .. }) => best,
                    Err(e) => return Err(e.into()),
                };
                Ok((target, joints))
            });
            match result {
                Ok((target, joints)) => {
                    out.arms.insert(
                        ecm,
                        ArmCommand {
                            target,
                            joints,
                            frozen: false,
                        },
                    );
                }
                Err(e) => out.failures.push(ArmFailure {
                    arm: ecm,
                    reason: e.to_string(),
                }),
            }
        }

        self.last = out.clone();
        out
    }
}
