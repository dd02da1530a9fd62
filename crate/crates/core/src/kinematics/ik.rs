use nalgebra::{DMatrix, DVector, Matrix6};

use super::arm::{ArmKind, ArmModel, JointVector, INSERTION};
use super::transform::{RigidTransform, UnitQuat, Vec3};
use super::KinematicsError;

/// Damped least-squares settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkParams {
    /// Damping factor; the normal equations use its square.
    pub damping: f64,
    /// Central-difference step for the numerical Jacobian.
    pub jacobian_step: f64,
    /// Position tolerance, meters.
    pub tol_position: f64,
    /// Orientation tolerance (geodesic angle), radians.
    pub tol_rotation: f64,
    pub max_iter: usize,
    /// Per-iteration cap on the task-space error that is chased.
    pub max_step_position: f64,
    pub max_step_rotation: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            damping: 1e-3,
            jacobian_step: 1e-6,
            tol_position: 1e-6,
            tol_rotation: 1e-6,
            max_iter: 100,
            max_step_position: 0.02,
            max_step_rotation: 0.4,
        }
    }
}

impl IkParams {
    pub fn with_tolerance(tol: f64) -> Self {
        IkParams {
            tol_position: tol,
            tol_rotation: tol,
            ..IkParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub joints: JointVector,
    pub iterations: usize,
    pub position_error: f64,
    pub rotation_error: f64,
}

/// Task-space error: translation difference and world-frame rotation vector
/// taking `current` onto `target`.
fn pose_error(target: &RigidTransform, current: &RigidTransform) -> (Vec3, Vec3) {
    let dp = target.translation - current.translation;
    let dr = target
        .rotation
        .compose(&current.rotation.inverse())
        .to_rotation_vector();
    (dp, dr)
}

fn cap(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Depth of the wrist center along the shaft that `target` would require.
fn required_insertion(model: &ArmModel, target: &RigidTransform) -> f64 {
    let wrist = target.compose(&model.tool_offset.inverse()).translation;
    model.base.inverse().transform_point(wrist).norm()
}

/// Numerical 6 x n Jacobian of the pose error around `q`.
fn jacobian(model: &ArmModel, q: &[f64], n: usize, h: f64) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(6, n);
    let mut qp = q.to_vec();
    let mut qm = q.to_vec();
    for j in 0..n {
        qp[j] = q[j] + h;
        qm[j] = q[j] - h;
        let tp = model.fk_unchecked(&qp);
        let tm = model.fk_unchecked(&qm);
        let (dp, dr) = pose_error(&tp, &tm);
        let s = 1.0 / (2.0 * h);
        for (r, v) in [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z].into_iter().enumerate() {
            jac[(r, j)] = v * s;
        }
        qp[j] = q[j];
        qm[j] = q[j];
    }
    jac
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    a - t * ((a + std::f64::consts::PI) / t).floor()
}

/// Closed-form starting points for a restart: shaft angles from the wrist
/// center direction, then both Euler branches of the remaining rotation.
fn restart_seeds(model: &ArmModel, target: &RigidTransform, seed: &JointVector) -> Vec<JointVector> {
    let local = model.base.inverse().compose(target).compose(&model.tool_offset.inverse());
    let p = local.translation;
    let Some(d) = p.normalized() else {
        return Vec::new();
    };
    let pitch = (-d.y).clamp(-1.0, 1.0).asin();
    let yaw = d.x.atan2(d.z);
    let orient = UnitQuat::rot_y(yaw).compose(&UnitQuat::rot_x(pitch));
    let m = orient.inverse().compose(&local.rotation).to_matrix();
    let mut out = Vec::new();
    let mut push = |tail: &[f64]| {
        let mut q = seed.clone();
        q.0[0] = yaw;
        q.0[1] = pitch;
        q.0[INSERTION] = p.norm();
        for (i, v) in tail.iter().enumerate() {
            q.0[3 + i] = wrap(*v);
        }
        model.clamp(&mut q);
        out.push(q);
    };
    match model.kind {
        ArmKind::Ecm => push(&[m[1][0].atan2(m[0][0])]),
        ArmKind::Psm => {
            // m = Rz(a) Rx(b) Ry(c)
            let b = m[2][1].clamp(-1.0, 1.0).asin();
            let c = (-m[2][0]).atan2(m[2][2]);
            let a = (-m[0][1]).atan2(m[1][1]);
            let pi = std::f64::consts::PI;
            push(&[a, b, c]);
            push(&[a + pi, pi - b, c + pi]);
        }
    }
    out
}

/// Iterative damped least-squares inverse kinematics.
///
/// Joints are clamped into their limits after each update. If the iteration
/// stalls (typically against a joint limit) it is restarted from closed-form
/// seeds. The PSM jaw is carried over from `seed` untouched.
pub fn diff_ik(
    model: &ArmModel,
    target: &RigidTransform,
    seed: &JointVector,
    params: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    if !(params.tol_position > 0.0 && params.tol_rotation > 0.0) {
        return Err(KinematicsError::InvalidTolerance);
    }
    model.fk(seed)?;
    let ins = model.joint_limits[INSERTION];
    let needed = required_insertion(model, target);
    let slack = params.tol_position;
    if needed > ins.max + slack || needed < ins.min - slack {
        return Err(KinematicsError::Unreachable {
            required_insertion: needed,
        });
    }

    let mut best = match dls(model, target, seed, params) {
        Ok(sol) => return Ok(sol),
        Err(best) => best,
    };
    for start in restart_seeds(model, target, seed) {
        match dls(model, target, &start, params) {
            Ok(sol) => return Ok(sol),
            Err(b) if b.position_error + b.rotation_error < best.position_error + best.rotation_error => {
                best = b
            }
            Err(_) => {}
        }
    }
    Err(KinematicsError::NotConverged {
        position_error: best.position_error,
        rotation_error: best.rotation_error,
        best: best.joints,
    })
}

/// One damped least-squares run; on failure returns the best iterate.
fn dls(
    model: &ArmModel,
    target: &RigidTransform,
    seed: &JointVector,
    params: &IkParams,
) -> Result<IkSolution, IkSolution> {
    let n = model.kind.pose_joint_count();
    let mut q = seed.clone();
    let mut best: Option<IkSolution> = None;
    let lambda2 = params.damping * params.damping;

    for iter in 0..=params.max_iter {
        let current = model.fk_unchecked(&q.0);
        let (dp, dr) = pose_error(target, &current);
        let (pe, re) = (dp.norm(), dr.norm());
        let candidate = IkSolution {
            joints: q.clone(),
            iterations: iter,
            position_error: pe,
            rotation_error: re,
        };
        if pe <= params.tol_position && re <= params.tol_rotation {
            return Ok(candidate);
        }
        if best
            .as_ref()
            .is_none_or(|b| pe + re < b.position_error + b.rotation_error)
        {
            best = Some(candidate);
        }
        if iter == params.max_iter {
            break;
        }

        let dp = cap(dp, params.max_step_position);
        let dr = cap(dr, params.max_step_rotation);
        let err = DVector::from_column_slice(&[dp.x, dp.y, dp.z, dr.x, dr.y, dr.z]);
        let jac = jacobian(model, &q.0, n, params.jacobian_step);
        let jjt: Matrix6<f64> = (&jac * jac.transpose()).fixed_view::<6, 6>(0, 0).into_owned()
            + Matrix6::identity() * lambda2;
        let Some(chol) = jjt.cholesky() else {
            break;
        };
        let y = chol.solve(&nalgebra::Vector6::from_column_slice(err.as_slice()));
        let dq = jac.transpose() * DVector::from_column_slice(y.as_slice());
        for j in 0..n {
            q.0[j] += dq[j];
        }
        model.clamp(&mut q);
    }

    Err(best.expect("at least one iteration evaluated"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psm() -> ArmModel {
        ArmModel::new(
            ArmKind::Psm,
            RigidTransform::new(UnitQuat::rot_x(0.3), Vec3::new(0.1, 0.0, 0.0)),
        )
    }

    #[test]
    fn fixed_point_needs_no_iterations() {
        let m = psm();
        let seed = JointVector(vec![0.2, -0.1, 0.1, 0.3, 0.1, -0.2, 0.5]);
        let target = m.fk(&seed).unwrap().pose;
        let sol = diff_ik(&m, &target, &seed, &IkParams::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.joints, seed);
    }

    #[test]
    fn converges_from_small_perturbation() {
        let m = psm();
        let seed = JointVector(vec![0.2, -0.1, 0.1, 0.3, 0.1, -0.2, 0.5]);
        let goal = JointVector(vec![0.25, -0.05, 0.11, 0.25, 0.18, -0.27, 0.5]);
        let target = m.fk(&goal).unwrap().pose;
        let p = IkParams::default();
        let sol = diff_ik(&m, &target, &seed, &p).unwrap();
        let (dp, da) = m.fk(&sol.joints).unwrap().pose.distance_to(&target);
        assert!(dp <= p.tol_position && da <= p.tol_rotation);
        assert_eq!(sol.joints.0[6], 0.5);
    }

    #[test]
    fn far_target_is_unreachable() {
        let m = psm();
        let seed = JointVector(vec![0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0]);
        let target = RigidTransform::from_translation(Vec3::new(10.0, 0.0, 0.0));
        assert!(matches!(
            diff_ik(&m, &target, &seed, &IkParams::default()),
            Err(KinematicsError::Unreachable { .. })
        ));
    }

    #[test]
    fn ecm_returns_best_effort_on_infeasible_orientation() {
        let m = ArmModel::new(ArmKind::Ecm, RigidTransform::IDENTITY);
        let seed = JointVector(vec![0.0, 0.0, 0.1, 0.0]);
        // sideways translation at fixed orientation is outside the 4-DOF manifold
        let target = RigidTransform::from_translation(Vec3::new(0.02, 0.0, 0.1));
        match diff_ik(&m, &target, &seed, &IkParams::default()) {
            Err(KinematicsError::NotConverged { best, .. }) => assert_eq!(best.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let m = psm();
        let seed = JointVector(vec![0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0]);
        let p = IkParams::with_tolerance(0.0);
        assert!(matches!(
            diff_ik(&m, &RigidTransform::IDENTITY, &seed, &p),
            Err(KinematicsError::InvalidTolerance)
        ));
    }
}
