use multiview_core::clocksync::SimClock;
use multiview_core::kinematics::{CameraModel, RigidTransform, UnitQuat, Vec3};
use multiview_core::pipeline::{
    align_streams, decode_seq, demosaic_bilinear, rectify_pair, synth_capture, synth_stereo,
    BayerFrame, BayerPattern, StereoRig, SynthConfig,
};
use proptest::prelude::*;

/// Maximum bipartite matching between two timestamp lists (edges where
/// |a - b| <= tol), by augmenting paths. Ignores ordering entirely.
fn max_matching(a: &[i64], b: &[i64], tol: i64) -> usize {
    let adj: Vec<Vec<usize>> = a
        .iter()
        .map(|x| (0..b.len()).filter(|&j| (x - b[j]).abs() <= tol).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; b.len()];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|o| augment(o, adj, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..a.len())
        .filter(|&i| augment(i, &adj, &mut vec![false; b.len()], &mut owner))
        .count()
}

fn increasing(n: std::ops::Range<usize>, max_gap: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(1..max_gap, n).prop_map(|gaps| {
        gaps.iter()
            .scan(0i64, |acc, g| {
                *acc += g;
                Some(*acc)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn alignment_count_is_optimal(
        a in increasing(0..200, 60_000_000),
        b in increasing(0..200, 60_000_000),
        tol in 0i64..30_000_000,
    ) {
        let al = align_streams(&[a.clone(), b.clone()], tol).unwrap();
        prop_assert_eq!(al.tuples.len(), max_matching(&a, &b, tol));
        let mut used = [vec![false; a.len()], vec![false; b.len()]];
        let mut prev: Option<i64> = None;
        for t in &al.tuples {
            prop_assert!(t.spread <= tol);
            prop_assert_eq!(t.spread, (a[t.frames[0]] - b[t.frames[1]]).abs());
            for s in 0..2 {
                prop_assert!(!used[s][t.frames[s]]);
                used[s][t.frames[s]] = true;
            }
            prop_assert!(prev.is_none_or(|p| a[t.frames[0]] > p));
            prev = Some(a[t.frames[0]]);
        }
        prop_assert_eq!(al.dropped[0] + al.tuples.len(), a.len());
        prop_assert_eq!(al.dropped[1] + al.tuples.len(), b.len());
    }

    #[test]
    fn three_stream_tuples_respect_tolerance(
        s in prop::collection::vec(increasing(0..60, 40), 3),
        tol in 0i64..15,
    ) {
        let al = align_streams(&s, tol).unwrap();
        for t in &al.tuples {
            let ts: Vec<i64> = (0..3).map(|k| s[k][t.frames[k]]).collect();
            prop_assert_eq!(&ts, &t.timestamps);
            prop_assert!(ts.iter().max().unwrap() - ts.iter().min().unwrap() <= tol);
        }
        for w in al.tuples.windows(2) {
            for k in 0..3 {
                prop_assert!(w[1].frames[k] > w[0].frames[k]);
            }
        }
    }

    #[test]
    fn demosaic_has_no_overshoot(w in 1u32..8, h in 1u32..8, px in prop::collection::vec(0u16..=255, 256)) {
        let (w, h) = (w * 2, h * 2);
        let n = (w * h) as usize;
        let f = BayerFrame {
            width: w,
            height: h,
            bit_depth: 8,
            pattern: BayerPattern::Rggb,
            pixels: px[..n].to_vec(),
            stream_id: 0,
            seq: 0,
            exposure_ts: 0,
        };
        let rgb = demosaic_bilinear(&f).unwrap();
        let (lo, hi) = (*f.pixels.iter().min().unwrap(), *f.pixels.iter().max().unwrap());
        prop_assert_eq!(rgb.pixels.len(), n);
        for p in &rgb.pixels {
            for c in p {
                prop_assert!(*c >= lo && *c <= hi);
            }
        }
    }

    #[test]
    fn demosaic_keeps_constants(v in 0u16..=u16::MAX, w in 1u32..10, h in 1u32..10) {
        let f = BayerFrame {
            width: w * 2,
            height: h * 2,
            bit_depth: 16,
            pattern: BayerPattern::Rggb,
            pixels: vec![v; (w * h * 4) as usize],
            stream_id: 0,
            seq: 0,
            exposure_ts: 0,
        };
        prop_assert!(demosaic_bilinear(&f).unwrap().pixels.iter().all(|p| *p == [v, v, v]));
    }

    #[test]
    fn rectified_rows_agree(
        rv in (-0.15..0.15f64, -0.15..0.15f64, -0.15..0.15f64),
        base in (0.002..0.02f64, -0.002..0.002f64, -0.002..0.002f64),
        pts in prop::collection::vec((-0.03..0.03f64, -0.03..0.03f64, 0.05..0.15f64), 100),
    ) {
        let cam = CameraModel::default();
        let rot = UnitQuat::from_rotation_vector(Vec3::new(rv.0, rv.1, rv.2));
        // right camera center at `base` in left coordinates
        let c = Vec3::new(base.0, base.1, base.2);
        let right_from_left = RigidTransform::new(rot, -rot.rotate(c));
        let rig = StereoRig { left: cam, right: cam, right_from_left };
        let r = rectify_pair(&rig).unwrap();
        for (x, y, z) in pts {
            let p = Vec3::new(x, y, z);
            let pl = r.left_point(p);
            let pr = r.right_point(rig.right_from_left.transform_point(p));
            let (a, b) = (r.intrinsics.project(pl).unwrap(), r.intrinsics.project(pr).unwrap());
            prop_assert!((a.v - b.v).abs() < 1e-9, "{}", (a.v - b.v).abs());
        }
    }

    #[test]
    fn capture_is_deterministic_and_self_describing(seq in 0u64..u32::MAX as u64, stream in 0u16..8, t in 0i64..1_000_000_000_000) {
        let cfg = SynthConfig::new(64, 32, stream);
        let a = synth_capture(&cfg, &SimClock::with_drift(12.0), t, seq).unwrap();
        let b = synth_capture(&cfg, &SimClock::ideal(), 0, seq).unwrap();
        prop_assert_eq!(&a.pixels, &b.pixels);
        prop_assert_eq!(decode_seq(&a).unwrap(), seq);
        let s = synth_stereo(&cfg, &SimClock::with_drift(12.0), t, seq).unwrap();
        prop_assert_eq!(s.left.exposure_ts, s.right.exposure_ts);
        prop_assert_eq!(s.left.exposure_ts, SimClock::with_drift(12.0).local_time(t));
    }
}

#[test]
fn five_ms_offset_matches_oracle() {
    let period = 1_000_000_000i64 / 30;
    let a: Vec<i64> = (0..200).map(|k| k * period).collect();
    let b: Vec<i64> = a.iter().map(|t| t + 5_000_000).collect();
    let al = align_streams(&[a.clone(), b.clone()], 16_600_000).unwrap();
    assert_eq!(al.tuples.len(), max_matching(&a, &b, 16_600_000));
    assert_eq!(al.tuples.len(), 200);
    assert!(al.tuples.iter().all(|t| t.spread == 5_000_000));
}
