use serde::{Deserialize, Serialize};

use super::transform::Vec3;
use super::KinematicsError;

/// Fixed-focus pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Stereo baseline, meters.
    pub baseline: f64,
    /// In-focus depth range `[min, max]`, meters.
    pub working_range: [f64; 2],
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            fx: 800.0,
            fy: 800.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            baseline: 0.005,
            working_range: [0.050, 0.150],
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let [lo, hi] = self.working_range;
        if self.fx > 0.0 && self.fy > 0.0 && self.baseline > 0.0 && lo < hi {
            Ok(())
        } else {
            Err(KinematicsError::InvalidCamera)
        }
    }

    pub fn in_working_range(&self, z: f64) -> bool {
        z >= self.working_range[0] && z <= self.working_range[1]
    }

    pub fn project(&self, p: Vec3) -> Result<Projection, KinematicsError> {
        project(self, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub in_working_range: bool,
}

/// Projects a point given in camera coordinates (z forward).
pub fn project(cam: &CameraModel, p: Vec3) -> Result<Projection, KinematicsError> {
    if !(p.z > 0.0) {
        return Err(KinematicsError::BehindCamera);
    }
    Ok(Projection {
        u: cam.fx * p.x / p.z + cam.cx,
        v: cam.fy * p.y / p.z + cam.cy,
        in_working_range: cam.in_working_range(p.z),
    })
}
