use std::collections::BTreeMap;

use multiview_core::kinematics::{
    ArmKind, ArmModel, JointVector, RigidTransform, UnitQuat, Vec3,
};
use multiview_core::teleop::{
    engage, teleop_step, ArmId, ConsoleId, MasterSide, MasterState, RoutingCommand, RoutingTable,
    Teleop, TeleopPair, TeleopSettings, WorldState,
};
use proptest::prelude::*;

fn id(s: &str) -> ArmId {
    ArmId::from(s)
}

fn con(s: &str) -> ConsoleId {
    ConsoleId::from(s)
}

fn world() -> WorldState {
    let psm = |x: f64, yaw: f64| {
        (
            ArmModel::new(
                ArmKind::Psm,
                RigidTransform::new(UnitQuat::rot_y(yaw), Vec3::new(x, 0.0, 0.0)),
            ),
            JointVector(vec![0.0, 0.0, 0.12, 0.0, 0.0, 0.0, 0.2]),
        )
    };
    let ecm = |x: f64| {
        (
            ArmModel::new(ArmKind::Ecm, RigidTransform::from_translation(Vec3::new(x, 0.0, -0.02))),
            JointVector(vec![0.0, 0.0, 0.04, 0.0]),
        )
    };
    WorldState::new(BTreeMap::from([
        (id("PSM1"), psm(0.06, -0.4)),
        (id("PSM2"), psm(-0.06, 0.4)),
        (id("PSM3"), psm(0.0, 0.0)),
        (id("ECM-A"), ecm(0.01)),
        (id("ECM-B"), ecm(-0.01)),
    ]))
    .unwrap()
}

fn table() -> RoutingTable {
    RoutingTable::new(
        [
            (id("PSM1"), id("ECM-A")),
            (id("PSM2"), id("ECM-A")),
            (id("PSM3"), id("ECM-B")),
        ]
        .into(),
        [id("ECM-A"), id("ECM-B")].into(),
        [con("console1"), con("console2")].into(),
        2,
    )
    .unwrap()
}

fn owned(t: &RoutingTable, console: &str, psm: &str) -> RoutingTable {
    t.apply(&RoutingCommand::AcquirePsm {
        console: con(console),
        psm: id(psm),
    })
    .unwrap()
    .table
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = UnitQuat> {
    vec3(3.0).prop_map(UnitQuat::from_rotation_vector)
}

fn pose() -> impl Strategy<Value = RigidTransform> {
    (rotation(), vec3(0.2)).prop_map(|(r, t)| RigidTransform::new(r, t))
}

fn master(pose: RigidTransform) -> MasterState {
    MasterState {
        pose,
        clutch: false,
        grip: 0.3,
    }
}

fn moved(m: &RigidTransform, dp: Vec3) -> RigidTransform {
    RigidTransform::new(m.rotation, m.translation + dp)
}

fn engaged(t: &RoutingTable, w: &WorldState, m: &RigidTransform, scale: f64) -> TeleopPair {
    let pair = TeleopPair::new(con("console1"), MasterSide::Right, id("PSM1"), scale).unwrap();
    engage(&pair, t, &master(*m), w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn no_jump_at_engage(cam in pose(), m in pose(), scale in 0.05..=1.0f64) {
        let t = owned(&table(), "console1", "PSM1");
        let mut w = world();
        w.set_pose(&id("ECM-A"), cam);
        let mut pair = engaged(&t, &w, &m, scale);
        let cmd = teleop_step(&mut pair, &t, &master(m), &w).unwrap();
        let (dp, da) = cmd.distance_to(w.pose(&id("PSM1")).unwrap());
        prop_assert!(dp <= 1e-12, "{dp}");
        prop_assert!(da <= 1e-12, "{da}");
    }

    #[test]
    fn clutch_holds_and_release_does_not_jump(
        cam in pose(),
        m in pose(),
        d1 in vec3(0.05),
        d2 in vec3(0.05),
        r2 in rotation(),
        d3 in vec3(0.05),
    ) {
        let t = owned(&table(), "console1", "PSM1");
        let mut w = world();
        w.set_pose(&id("ECM-A"), cam);
        let mut pair = engaged(&t, &w, &m, 0.5);
        let before = teleop_step(&mut pair, &t, &master(moved(&m, d1)), &w).unwrap();
        // clutched: any master motion leaves the command bit-identical
        let clutched_pose = RigidTransform::new(r2, m.translation + d2);
        let held = teleop_step(
            &mut pair,
            &t,
            &MasterState { clutch: true, ..master(clutched_pose) },
            &w,
        )
        .unwrap();
        prop_assert_eq!(held, before);
        // releasing the clutch where the hand now is commands the same pose
        let after = teleop_step(&mut pair, &t, &master(clutched_pose), &w).unwrap();
        let (dp, da) = after.distance_to(&before);
        prop_assert!(dp <= 1e-12 && da <= 1e-12, "{dp} {da}");
        // and motion resumes relative to the new anchor
        let next = teleop_step(&mut pair, &t, &master(moved(&clutched_pose, d3)), &w).unwrap();
        let in_cam = cam.rotation.inverse().rotate(next.translation - after.translation);
        prop_assert!((in_cam - d3 * 0.5).norm() <= 1e-9);
    }

    #[test]
    fn view_consistency(cam in pose(), m in pose(), d in vec3(0.05), scale in 0.05..=1.0f64) {
        let t = owned(&table(), "console1", "PSM1");
        let mut w = world();
        w.set_pose(&id("ECM-A"), cam);
        let tip = *w.pose(&id("PSM1")).unwrap();
        let mut pair = engaged(&t, &w, &m, scale);
        let cmd = teleop_step(&mut pair, &t, &master(moved(&m, d)), &w).unwrap();
        let in_cam = cam.rotation.inverse().rotate(cmd.translation - tip.translation);
        prop_assert!((in_cam - d * scale).norm() <= 1e-9);
    }

    #[test]
    fn orientation_offset_composes_back(cam in pose(), m in pose()) {
        let t = owned(&table(), "console1", "PSM1");
        let mut w = world();
        w.set_pose(&id("ECM-A"), cam);
        let pair = engaged(&t, &w, &m, 1.0);
        let tip_cam = cam.inverse().compose(w.pose(&id("PSM1")).unwrap());
        prop_assert!(pair.orientation_offset.compose(&m.rotation).angle_to(&tip_cam.rotation) < 1e-12);
    }

    #[test]
    fn equivariance_under_camera_rotation(
        cam in pose(),
        r in rotation(),
        m in pose(),
        d in vec3(0.05),
        dr in vec3(0.3),
    ) {
        let t = owned(&table(), "console1", "PSM1");
        let target = RigidTransform::new(UnitQuat::from_rotation_vector(dr).compose(&m.rotation), m.translation + d);
        let delta = |c: RigidTransform| {
            let mut w = world();
            w.set_pose(&id("ECM-A"), c);
            let mut pair = engaged(&t, &w, &m, 0.3);
            let tip = w.pose(&id("PSM1")).unwrap().translation;
            teleop_step(&mut pair, &t, &master(target), &w).unwrap().translation - tip
        };
        let a = delta(cam);
        let b = delta(RigidTransform::from_rotation(r).compose(&cam));
        prop_assert!((b - r.rotate(a)).norm() <= 1e-9);
    }

    #[test]
    fn routing_invariants_under_fuzz(cmds in prop::collection::vec((0u8..4, 0usize..4, 0usize..3, 0usize..3), 1..60)) {
        let psms = ["PSM1", "PSM2", "PSM3", "PSM9"];
        let ecms = ["ECM-A", "ECM-B", "PSM1"];
        let consoles = ["console1", "console2", "ghost"];
        let mut t = table();
        for (op, p, e, c) in cmds {
            let cmd = match op {
                0 => RoutingCommand::AssignPsm { psm: id(psms[p]), ecm: id(ecms[e]) },
                1 => RoutingCommand::SelectView { console: con(consoles[c]), ecm: id(ecms[e]) },
                2 => RoutingCommand::AcquirePsm { console: con(consoles[c]), psm: id(psms[p]) },
                _ => RoutingCommand::ReleasePsm { console: con(consoles[c]), psm: id(psms[p]) },
            };
            let before = t.clone();
            match t.apply(&cmd) {
                Ok(up) => t = up.table,
                Err(_) => prop_assert_eq!(&t, &before),
            }
            prop_assert!(t.check_invariants().is_ok());
            // every instrument keeps exactly one camera
            prop_assert_eq!(t.psm_to_ecm().len(), 3);
            for c in ["console1", "console2"] {
                prop_assert!(t.owned_count(&con(c)) <= 2);
            }
        }
    }
}

fn masters(entries: &[(&str, MasterSide, RigidTransform)]) -> BTreeMap<(ConsoleId, MasterSide), MasterState> {
    entries
        .iter()
        .map(|(c, s, p)| ((con(c), *s), master(*p)))
        .collect()
}

/// Applies the commanded joints to the world, as the simulator does.
fn apply(w: &mut WorldState, cmds: &multiview_core::teleop::CommandSet) {
    for (arm, c) in &cmds.arms {
        w.set_joints(arm, c.joints.clone()).unwrap();
    }
}

#[test]
fn frozen_arms_are_bit_identical() {
    let mut w = world();
    let t = owned(&table(), "console1", "PSM1");
    let mut tele = Teleop::new(t, TeleopSettings::default(), &w);
    let m0 = RigidTransform::IDENTITY;
    tele.engage(&con("console1"), MasterSide::Right, &id("PSM1"), &master(m0), &w)
        .unwrap();
    let first = tele.resolve_commands(&masters(&[]), &w);
    let frozen: Vec<ArmId> = ["PSM2", "PSM3", "ECM-A", "ECM-B"].map(id).to_vec();
    let reference: Vec<_> = frozen.iter().map(|a| first.arms[a].clone()).collect();
    for k in 0..1000 {
        let s = (k as f64 * 0.01).sin() * 0.02;
        let p = RigidTransform::new(UnitQuat::rot_z(s), Vec3::new(s, 0.5 * s, -s));
        let out = tele.resolve_commands(&masters(&[("console1", MasterSide::Right, p)]), &w);
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert!(!out.arms[&id("PSM1")].frozen);
        for (a, r) in frozen.iter().zip(&reference) {
            assert_eq!(&out.arms[a], r, "tick {k}");
            assert!(out.arms[a].frozen);
        }
        apply(&mut w, &out);
    }
    // the engaged arm did move
    assert_ne!(w.arm(&id("PSM1")).unwrap().joints, JointVector(vec![0.0, 0.0, 0.12, 0.0, 0.0, 0.0, 0.2]));
}

#[test]
fn idle_tick_reproduces_previous_set() {
    let w = world();
    let mut tele = Teleop::new(table(), TeleopSettings::default(), &w);
    let a = tele.resolve_commands(&masters(&[]), &w);
    let b = tele.resolve_commands(&masters(&[]), &w);
    assert_eq!(a, b);
    assert!(a.arms.values().all(|c| c.frozen));
}

/// Two consoles driving instruments in different camera frames behave like
/// two independent single-console runs.
#[test]
fn two_consoles_match_single_console_runs() {
    let mut t = owned(&table(), "console1", "PSM1");
    t = owned(&t, "console2", "PSM3");
    let path = |k: usize, sign: f64| {
        let s = k as f64 * 0.002;
        RigidTransform::new(UnitQuat::rot_x(sign * s), Vec3::new(sign * s * 0.5, s * 0.3, 0.0))
    };
    let run = |consoles: &[(&str, &str)]| {
        let mut w = world();
        let mut tele = Teleop::new(t.clone(), TeleopSettings::default(), &w);
        for (c, p) in consoles {
            tele.engage(&con(c), MasterSide::Left, &id(p), &master(RigidTransform::IDENTITY), &w)
                .unwrap();
        }
        let mut trace = Vec::new();
        for k in 0..200 {
            let ms: Vec<_> = consoles
                .iter()
                .map(|(c, _)| (*c, MasterSide::Left, path(k, if *c == "console1" { 1.0 } else { -1.0 })))
                .collect();
            let out = tele.resolve_commands(&masters(&ms), &w);
            apply(&mut w, &out);
            trace.push((
                out.arms[&id("PSM1")].clone(),
                out.arms[&id("PSM3")].clone(),
            ));
        }
        trace
    };
    let both = run(&[("console1", "PSM1"), ("console2", "PSM3")]);
    let only1 = run(&[("console1", "PSM1")]);
    let only2 = run(&[("console2", "PSM3")]);
    for k in 0..200 {
        assert_eq!(both[k].0, only1[k].0);
        assert_eq!(both[k].1, only2[k].1);
    }
}

#[test]
fn camera_mode_moves_camera_and_holds_instruments() {
    let mut w = world();
    let mut t = owned(&table(), "console1", "PSM1");
    t = t
        .apply(&RoutingCommand::SelectView { console: con("console1"), ecm: id("ECM-A") })
        .unwrap()
        .table;
    let mut tele = Teleop::new(t, TeleopSettings::default(), &w);
    let m = master(RigidTransform::IDENTITY);
    tele.engage(&con("console1"), MasterSide::Left, &id("PSM1"), &m, &w).unwrap();
    tele.set_camera_mode(&con("console1"), true, &m, &w).unwrap();
    let cam0 = *w.pose(&id("ECM-A")).unwrap();
    let tip0 = *w.pose(&id("PSM1")).unwrap();
    for k in 1..=50 {
        let p = RigidTransform::from_translation(Vec3::new(0.0, 0.0, -0.0002 * k as f64));
        let out = tele.resolve_commands(
            &masters(&[
                ("console1", MasterSide::Right, p),
                ("console1", MasterSide::Left, RigidTransform::from_translation(Vec3::new(0.01, 0.0, 0.0))),
            ]),
            &w,
        );
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        apply(&mut w, &out);
    }
    let cam1 = *w.pose(&id("ECM-A")).unwrap();
    // pulling the hand back pushes the camera forward along its view axis
    let along = cam0.rotation.inverse().rotate(cam1.translation - cam0.translation);
    assert!((along.z - 0.01).abs() < 1e-6, "{along:?}");
    // the instrument did not follow the left hand while steering the camera
    assert_eq!(w.pose(&id("PSM1")).unwrap(), &tip0);
    // a second console cannot grab the same camera
    let mut t2 = tele.table().clone();
    t2 = t2
        .apply(&RoutingCommand::SelectView { console: con("console2"), ecm: id("ECM-A") })
        .unwrap()
        .table;
    let mut tele2 = Teleop::new(t2, TeleopSettings::default(), &w);
    tele2.set_camera_mode(&con("console1"), true, &m, &w).unwrap();
    assert!(tele2.set_camera_mode(&con("console2"), true, &m, &w).is_err());
}
