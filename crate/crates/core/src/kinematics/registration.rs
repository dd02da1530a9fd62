use nalgebra::{Matrix3, Vector3};

use super::transform::{RigidTransform, UnitQuat, Vec3};
use super::KinematicsError;

/// Correspondence between a point measured in world coordinates and the same
/// point measured in an arm's base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPair {
    pub world: Vec3,
    pub base: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    /// world <- base
    pub transform: RigidTransform,
    /// Root-mean-square of `world - transform(base)`, meters.
    pub rms: f64,
}

fn to_na(v: Vec3) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

/// Least-squares rigid fit (no scale) of base-frame points onto world points.
///
/// Orthogonal Procrustes via SVD of the cross-covariance, with the
/// determinant guard against reflections.
pub fn register_base(pairs: &[PointPair]) -> Result<Registration, KinematicsError> {
    if pairs.len() < 3 {
        return Err(KinematicsError::TooFewPairs(pairs.len()));
    }
    let n = pairs.len() as f64;
    let cw = pairs.iter().fold(Vector3::zeros(), |a, p| a + to_na(p.world)) / n;
    let cb = pairs.iter().fold(Vector3::zeros(), |a, p| a + to_na(p.base)) / n;

    let mut spread = Matrix3::zeros();
    let mut cov = Matrix3::zeros();
    for p in pairs {
        let b = to_na(p.base) - cb;
        let w = to_na(p.world) - cw;
        spread += b * b.transpose();
        cov += w * b.transpose();
    }
    // Collinear (or coincident) base points leave rotation about the line free.
    let ev = spread.symmetric_eigenvalues();
    let mut ev: Vec<f64> = ev.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= ev[0] * 1e-12 {
        return Err(KinematicsError::DegenerateConfiguration);
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = u * fix * v_t;
    let t = cw - r * cb;

    let m = [
        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
    ];
    let transform = RigidTransform::new(UnitQuat::from_matrix(&m), Vec3::new(t.x, t.y, t.z));
    let sq: f64 = pairs
        .iter()
        .map(|p| {
            let e = p.world - transform.transform_point(p.base);
            e.dot(&e)
        })
        .sum();
    Ok(Registration {
        transform,
        rms: (sq / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames_give_identity() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let pairs: Vec<_> = pts.iter().map(|&p| PointPair { world: p, base: p }).collect();
        let reg = register_base(&pairs).unwrap();
        let (dp, da) = reg.transform.distance_to(&RigidTransform::IDENTITY);
        assert!(dp < 1e-12 && da < 1e-9);
        assert!(reg.rms < 1e-12);
    }

    #[test]
    fn recovers_known_transform() {
        let truth = RigidTransform::new(
            UnitQuat::from_axis_angle(Vec3::Z, 30f64.to_radians()),
            Vec3::new(0.1, 0.0, 0.0),
        );
        // fixed pseudo-random cloud
        let mut s = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let pairs: Vec<_> = (0..10)
            .map(|_| {
                let b = Vec3::new(next(), next(), next());
                PointPair {
                    world: truth.transform_point(b),
                    base: b,
                }
            })
            .collect();
        let reg = register_base(&pairs).unwrap();
        let (dp, da) = reg.transform.distance_to(&truth);
        assert!(dp < 1e-9 && da < 1e-9, "{dp} {da}");
        assert!(reg.rms < 1e-12);
    }

    #[test]
    fn two_pairs_rejected() {
        let p = PointPair {
            world: Vec3::X,
            base: Vec3::X,
        };
        assert!(matches!(
            register_base(&[p, p]),
            Err(KinematicsError::TooFewPairs(2))
        ));
    }

    #[test]
    fn collinear_rejected() {
        let pairs: Vec<_> = (0..5)
            .map(|i| {
                let p = Vec3::new(i as f64, 2.0 * i as f64, 0.0);
                PointPair { world: p, base: p }
            })
            .collect();
        assert!(matches!(
            register_base(&pairs),
            Err(KinematicsError::DegenerateConfiguration)
        ));
    }

    #[test]
    fn coplanar_points_do_not_reflect() {
        let truth = RigidTransform::new(
            UnitQuat::from_axis_angle(Vec3::new(1.0, -1.0, 0.5), 1.2),
            Vec3::new(-0.3, 0.2, 0.9),
        );
        let base = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.0, 0.1, 0.0),
            Vec3::new(0.1, 0.1, 0.0),
        ];
        let pairs: Vec<_> = base
            .iter()
            .map(|&b| PointPair {
                world: truth.transform_point(b),
                base: b,
            })
            .collect();
        let reg = register_base(&pairs).unwrap();
        let (dp, da) = reg.transform.distance_to(&truth);
        assert!(dp < 1e-9 && da < 1e-9);
    }
}
