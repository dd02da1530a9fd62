use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::kinematics::{CameraModel, RigidTransform, UnitQuat, Vec3};

/// Calibrated two-camera rig. `right_from_left` maps left-camera
/// coordinates into the right camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub left: CameraModel,
    pub right: CameraModel,
    pub right_from_left: RigidTransform,
}

impl StereoRig {
    /// Parallel cameras with the right one `camera.baseline` along +x.
    pub fn parallel(camera: CameraModel) -> Self {
        StereoRig {
            left: camera,
            right: camera,
            right_from_left: RigidTransform::from_translation(Vec3::new(-camera.baseline, 0.0, 0.0)),
        }
    }

    /// Right camera center in left-camera coordinates.
    pub fn right_center(&self) -> Vec3 {
        let inv = self.right_from_left.inverse();
        inv.translation
    }

    pub fn baseline(&self) -> f64 {
        self.right_from_left.translation.norm()
    }
}

/// Rotations taking each camera's coordinates into the common rectified
/// frame, plus the shared intrinsics used to project there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectification {
    pub r_left: UnitQuat,
    pub r_right: UnitQuat,
    pub intrinsics: CameraModel,
    pub baseline: f64,
}

impl Rectification {
    pub fn left_point(&self, p_left: Vec3) -> Vec3 {
        self.r_left.rotate(p_left)
    }

    pub fn right_point(&self, p_right: Vec3) -> Vec3 {
        self.r_right.rotate(p_right)
    }
}

/// Closed-form calibrated rectification.
///
/// New x is the baseline direction, new z the mean optical axis made
/// orthogonal to it, new y completes the right-handed frame.
pub fn rectify_pair(rig: &StereoRig) -> Result<Rectification, PipelineError> {
    let c = rig.right_center();
    let e1 = c.normalized().ok_or(PipelineError::ZeroBaseline)?;
    let axis_right = rig.right_from_left.rotation.inverse().rotate(Vec3::Z);
    let mean = (Vec3::Z + axis_right) * 0.5;
    let e3 = (mean - e1 * mean.dot(&e1))
        .normalized()
        .ok_or(PipelineError::DegenerateRig)?;
    let e2 = e3.cross(&e1);
    let rect = UnitQuat::from_matrix(&[e1.to_array(), e2.to_array(), e3.to_array()]);
    let r_right = rect.compose(&rig.right_from_left.rotation.inverse());
    let mut intrinsics = rig.left;
    let f = 0.5 * (rig.left.fy + rig.right.fy);
    intrinsics.fx = f;
    intrinsics.fy = f;
    intrinsics.cx = 0.5 * (rig.left.cx + rig.right.cx);
    intrinsics.cy = 0.5 * (rig.left.cy + rig.right.cy);
    intrinsics.baseline = c.norm();
    Ok(Rectification {
        r_left: rect,
        r_right,
        intrinsics,
        baseline: c.norm(),
    })
}
