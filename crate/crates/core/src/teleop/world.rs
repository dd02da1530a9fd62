use std::collections::BTreeMap;

use crate::kinematics::{ArmKind, ArmModel, JointVector, KinematicsError, RigidTransform};

use super::ArmId;

/// Current joint state and pose of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub model: ArmModel,
    pub joints: JointVector,
    /// world <- tip (PSM) or world <- camera (ECM); always `fk(joints)`.
    pub pose: RigidTransform,
}

/// Snapshot of every arm, keyed by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldState {
    arms: BTreeMap<ArmId, ArmState>,
}

impl WorldState {
    pub fn new(arms: BTreeMap<ArmId, (ArmModel, JointVector)>) -> Result<Self, KinematicsError> {
        let mut out = BTreeMap::new();
        for (id, (model, joints)) in arms {
            model.validate()?;
            let pose = model.fk(&joints)?.pose;
            out.insert(
                id,
                ArmState {
                    model,
                    joints,
                    pose,
                },
            );
        }
        Ok(WorldState { arms: out })
    }

    pub fn arm(&self, id: &ArmId) -> Option<&ArmState> {
        self.arms.get(id)
    }

    pub fn pose(&self, id: &ArmId) -> Option<&RigidTransform> {
        self.arms.get(id).map(|a| &a.pose)
    }

    pub fn arms(&self) -> impl Iterator<Item = (&ArmId, &ArmState)> {
        self.arms.iter()
    }

    pub fn ids_of(&self, kind: ArmKind) -> impl Iterator<Item = &ArmId> {
        self.arms
            .iter()
            .filter(move |(_, a)| a.model.kind == kind)
            .map(|(id, _)| id)
    }

    /// Moves an arm. Unchanged joints leave the stored pose untouched.
    pub fn set_joints(&mut self, id: &ArmId, joints: JointVector) -> Result<(), KinematicsError> {
        let Some(arm) = self.arms.get_mut(id) else {
            return Ok(());
        };
        if arm.joints == joints {
            return Ok(());
        }
        arm.pose = arm.model.fk(&joints)?.pose;
        arm.joints = joints;
        Ok(())
    }

    /// Overrides an ECM pose without touching its joints. Used by tests and
    /// analyses that study camera placement independently of the arm.
    pub fn set_pose(&mut self, id: &ArmId, pose: RigidTransform) {
        if let Some(arm) = self.arms.get_mut(id) {
            arm.pose = pose;
        }
    }
}
