use serde::{Deserialize, Serialize};

use super::transform::{RigidTransform, UnitQuat, Vec3};
use super::KinematicsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ArmKind {
    /// Instrument arm: yaw, pitch, insertion, roll, wrist pitch, wrist yaw, jaw.
    Psm,
    /// Camera arm: yaw, pitch, insertion, roll.
    Ecm,
}

impl ArmKind {
    pub fn joint_count(self) -> usize {
        match self {
            ArmKind::Psm => 7,
            ArmKind::Ecm => 4,
        }
    }

    /// Joints that influence the tip pose (the PSM jaw does not).
    pub fn pose_joint_count(self) -> usize {
        match self {
            ArmKind::Psm => 6,
            ArmKind::Ecm => 4,
        }
    }

    pub fn default_limits(self) -> Vec<JointLimit> {
        let mut limits = vec![
            JointLimit::new(-1.5, 1.5),
            JointLimit::new(-1.5, 1.5),
            JointLimit::new(0.0, 0.24),
            JointLimit::new(-2.2, 2.2),
        ];
        if self == ArmKind::Psm {
            limits.push(JointLimit::new(-1.4, 1.4));
            limits.push(JointLimit::new(-1.4, 1.4));
            limits.push(JointLimit::new(0.0, 1.0));
        }
        limits
    }
}

/// Index of the prismatic insertion joint for both arm kinds.
pub const INSERTION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct JointLimit {
    pub min: f64,
    pub max: f64,
}

impl JointLimit {
    pub const fn new(min: f64, max: f64) -> Self {
        JointLimit { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

impl From<[f64; 2]> for JointLimit {
    fn from(a: [f64; 2]) -> Self {
        JointLimit::new(a[0], a[1])
    }
}

impl From<JointLimit> for [f64; 2] {
    fn from(l: JointLimit) -> Self {
        [l.min, l.max]
    }
}

/// Joint positions in arm order (radians, insertion in meters).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(pub Vec<f64>);

impl JointVector {
    pub fn zeros(kind: ArmKind) -> Self {
        JointVector(vec![0.0; kind.joint_count()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for JointVector {
    fn from(v: Vec<f64>) -> Self {
        JointVector(v)
    }
}

/// Remote-center-of-motion arm. The RCM sits at the origin of `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub kind: ArmKind,
    /// world <- base
    pub base: RigidTransform,
    /// last joint frame <- tip (or camera)
    #[serde(default)]
    pub tool_offset: RigidTransform,
    pub joint_limits: Vec<JointLimit>,
}

impl ArmModel {
    pub fn new(kind: ArmKind, base: RigidTransform) -> Self {
        ArmModel {
            kind,
            base,
            tool_offset: RigidTransform::IDENTITY,
            joint_limits: kind.default_limits(),
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let n = self.kind.joint_count();
        if self.joint_limits.len() != n {
            return Err(KinematicsError::JointCount {
                expected: n,
                got: self.joint_limits.len(),
            });
        }
        let ins = self.joint_limits[INSERTION];
        if !(ins.min >= 0.0 && ins.min < ins.max) {
            return Err(KinematicsError::InvalidLimits(INSERTION));
        }
        if let Some(i) = self.joint_limits.iter().position(|l| !(l.min <= l.max)) {
            return Err(KinematicsError::InvalidLimits(i));
        }
        Ok(())
    }

    fn check_len(&self, q: &JointVector) -> Result<(), KinematicsError> {
        let expected = self.kind.joint_count();
        if q.len() != expected {
            return Err(KinematicsError::JointCount {
                expected,
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Indices of joints outside their limits.
    pub fn limit_violations(&self, q: &JointVector) -> Vec<usize> {
        q.0.iter()
            .zip(&self.joint_limits)
            .enumerate()
            .filter(|(_, (v, l))| !l.contains(**v))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn clamp(&self, q: &mut JointVector) {
        for (v, l) in q.0.iter_mut().zip(&self.joint_limits) {
            *v = l.clamp(*v);
        }
    }

    /// Pose of the frame just after the roll joint (before the wrist), in
    /// world coordinates. Its origin lies on the shaft and its z axis is the
    /// shaft direction.
    pub fn shaft_frame(&self, q: &JointVector) -> Result<RigidTransform, KinematicsError> {
        self.check_len(q)?;
        Ok(self.base.compose(&shaft_chain(&q.0)))
    }

    pub fn fk(&self, q: &JointVector) -> Result<Forward, KinematicsError> {
        self.check_len(q)?;
        Ok(Forward {
            pose: self.fk_unchecked(&q.0),
            violations: self.limit_violations(q),
        })
    }

    pub(crate) fn fk_unchecked(&self, q: &[f64]) -> RigidTransform {
        let mut t = shaft_chain(q);
        if self.kind == ArmKind::Psm {
            t = t.compose(&RigidTransform::from_rotation(
                UnitQuat::rot_x(q[4]).compose(&UnitQuat::rot_y(q[5])),
            ));
        }
        self.base.compose(&t).compose(&self.tool_offset)
    }
}

fn shaft_chain(q: &[f64]) -> RigidTransform {
    let orient = UnitQuat::rot_y(q[0]).compose(&UnitQuat::rot_x(q[1]));
    RigidTransform::new(
        orient.compose(&UnitQuat::rot_z(q[3])),
        orient.rotate(Vec3::new(0.0, 0.0, q[INSERTION])),
    )
}

/// Forward kinematics result. Out-of-limit joints are reported, not rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// world <- tip (PSM) or world <- camera (ECM)
    pub pose: RigidTransform,
    pub violations: Vec<usize>,
}

impl Forward {
    pub fn within_limits(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Free-function form of [`ArmModel::fk`].
pub fn fk(model: &ArmModel, q: &JointVector) -> Result<Forward, KinematicsError> {
    model.fk(q)
}
