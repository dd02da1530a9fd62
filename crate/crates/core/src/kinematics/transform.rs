use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or direction in 3D. Units are meters for positions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(&self, o: &Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(&self) -> Option<Vec3> {
        let n = self.norm();
        (n > 1e-300).then(|| *self * (1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Unit quaternion in canonical form (`w >= 0`).
///
/// Every constructor renormalizes and flips the sign so that `w` is
/// non-negative; when `w == 0` the first non-zero vector component is made
/// positive. Two quaternions describing the same rotation therefore compare
/// equal component-wise (up to rounding).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        UnitQuat::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a rotation from raw components, normalizing and canonicalizing.
    /// A zero quaternion maps to the identity.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return UnitQuat::IDENTITY;
        }
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        let flip = if w != 0.0 {
            w < 0.0
        } else if x != 0.0 {
            x < 0.0
        } else if y != 0.0 {
            y < 0.0
        } else {
            z < 0.0
        };
        if flip {
            UnitQuat {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            UnitQuat { w, x, y, z }
        }
    }

    /// Keeps stored components bit-exact when they are already a canonical
    /// unit quaternion; falls back to [`UnitQuat::new`] otherwise.
    pub fn from_stored(q: [f64; 4]) -> Self {
        let [w, x, y, z] = q;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() <= 1e-9 && w > 0.0 {
            UnitQuat { w, x, y, z }
        } else {
            UnitQuat::new(w, x, y, z)
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        match axis.normalized() {
            Some(a) => {
                let (s, c) = (angle * 0.5).sin_cos();
                UnitQuat::new(c, a.x * s, a.y * s, a.z * s)
            }
            None => UnitQuat::IDENTITY,
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        UnitQuat::from_axis_angle(Vec3::X, angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        UnitQuat::from_axis_angle(Vec3::Y, angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        UnitQuat::from_axis_angle(Vec3::Z, angle)
    }

    /// Exponential map of a rotation vector (axis scaled by angle).
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            UnitQuat::new(1.0, v.x * 0.5, v.y * 0.5, v.z * 0.5)
        } else {
            UnitQuat::from_axis_angle(v, angle)
        }
    }

    /// Logarithm map: the rotation vector with angle in `[0, pi]`.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let v = Vec3::new(self.x, self.y, self.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(self.w);
        v * (angle / s)
    }

    /// Rotation from a 3x3 row-major matrix (Shepperd's method).
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        let tr = m[0][0] + m[1][1] + m[2][2];
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            UnitQuat::new(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            UnitQuat::new(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            UnitQuat::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            UnitQuat::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        }
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn inverse(&self) -> UnitQuat {
        UnitQuat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * o` (apply `o` first, then `self`).
    pub fn compose(&self, o: &UnitQuat) -> UnitQuat {
        let (a, b) = (self, o);
        UnitQuat::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w(q x v) + 2 q x (q x v)
        let q = Vec3::new(self.x, self.y, self.z);
        let t = q.cross(&v) * 2.0;
        v + t * self.w + q.cross(&t)
    }

    /// Geodesic angle between two rotations, in `[0, pi]`.
    /// Geodesic angle between two rotations, in `[0, pi]`.
    pub fn angle_to(&self, o: &UnitQuat) -> f64 {
        // atan2 of the relative rotation stays accurate near zero, where
        // acos of the dot product loses half the digits
        let r = self.inverse().compose(o);
        let s = (r.x * r.x + r.y * r.y + r.z * r.z).sqrt();
        2.0 * s.atan2(r.w.abs())
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl From<[f64; 4]> for UnitQuat {
    fn from(a: [f64; 4]) -> Self {
        UnitQuat::new(a[0], a[1], a[2], a[3])
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, o: UnitQuat) -> UnitQuat {
        self.compose(&o)
    }
}

/// Proper rigid transform. Read `a_from_b` style: applying it to a point in
/// frame `b` yields the point in frame `a`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: UnitQuat,
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: UnitQuat::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: UnitQuat, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform::new(UnitQuat::IDENTITY, t)
    }

    pub fn from_rotation(r: UnitQuat) -> Self {
        RigidTransform::new(r, Vec3::ZERO)
    }

    /// `self ∘ o`: applies `o` first, then `self`.
    pub fn compose(&self, o: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.compose(&o.rotation),
            translation: self.rotation.rotate(o.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let r = self.rotation.inverse();
        RigidTransform {
            rotation: r,
            translation: -r.rotate(self.translation),
        }
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    /// Position distance and geodesic rotation angle to another transform.
    pub fn distance_to(&self, o: &RigidTransform) -> (f64, f64) {
        (
            (self.translation - o.translation).norm(),
            self.rotation.angle_to(&o.rotation),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.translation.is_finite() && self.rotation.to_array().iter().all(|v| v.is_finite())
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, o: RigidTransform) -> RigidTransform {
        self.compose(&o)
    }
}

/// Free-function form of [`RigidTransform::compose`].
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}
