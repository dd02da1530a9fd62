use multiview_core::clocksync::{
    estimate, run_sync, two_step_exchange, LinkModel, SimClock, SlaveConfig, SyncStatus,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn slave(id: &str, clock: SimClock, link: LinkModel) -> SlaveConfig {
    SlaveConfig {
        id: id.into(),
        clock,
        link,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn estimator_recovers_offset_exactly(
        m_off in -1_000_000_000i64..1_000_000_000,
        s_off in -1_000_000_000i64..1_000_000_000,
        delay in 1i64..5_000_000,
        t in 0i64..100_000_000_000,
    ) {
        let master = SimClock::with_offset(m_off);
        let slave = SimClock::with_offset(s_off);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = two_step_exchange(&master, &slave, &LinkModel::symmetric(delay, 0.0), t, &mut rng).unwrap();
        let est = estimate(&ex.sample).unwrap();
        prop_assert_eq!(est.offset, s_off - m_off);
        prop_assert_eq!(est.mean_delay, delay);
    }

    #[test]
    fn timestamps_follow_the_clock_models(
        drift in -50.0..50.0f64,
        off in -100_000i64..100_000,
        d1 in 1i64..100_000,
        d2 in 1i64..100_000,
        t in 0i64..30_000_000_000,
    ) {
        let master = SimClock::ideal();
        let slave = SimClock { offset0_ns: off, ..SimClock::with_drift(drift) };
        let link = LinkModel { delay_m2s_ns: d1, delay_s2m_ns: d2, ..LinkModel::symmetric(1, 0.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = two_step_exchange(&master, &slave, &link, t, &mut rng).unwrap().sample;
        prop_assert_eq!(s.t1, t);
        prop_assert_eq!(s.t2 - s.t1, slave.local_time(t + d1) - master.local_time(t));
        prop_assert_eq!(s.t4, t + d1 + link.turnaround_ns + d2);
    }
}

#[test]
fn asymmetry_bias_is_half_the_difference() {
    for (m2s, s2m) in [(20_000, 10_000), (10_000, 20_000), (50_000, 12_000)] {
        let link = LinkModel {
            delay_m2s_ns: m2s,
            delay_s2m_ns: s2m,
            ..LinkModel::symmetric(1, 0.0)
        };
        let clocks = [
            SimClock::with_offset(300_000),
            SimClock { offset0_ns: -20_000, ..SimClock::with_drift(40.0) },
        ];
        for clock in clocks {
            let r = run_sync(&SimClock::ideal(), &[slave("s", clock, link.clone())], 30.0, 0.1, 5).unwrap();
            let want = (m2s - s2m) as f64 / 2.0;
            let tail = &r.slaves[0].samples[270..];
            for s in tail {
                // the servo drives the estimate to zero, which leaves the
                // clock behind by the bias
                let got = -s.residual_ns as f64;
                assert!((got - want).abs() <= 0.05 * want.abs(), "{m2s}/{s2m}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn default_config_meets_sub_microsecond() {
    let master = SimClock::ideal();
    let link = LinkModel::symmetric(10_000, 200.0);
    let slaves: Vec<_> = [(-50.0, 1), (37.5, 2), (50.0, 3)]
        .iter()
        .map(|(d, s)| {
            slave(
                &format!("dev{s}"),
                SimClock {
                    offset0_ns: 1_000_000 * s,
                    noise_sigma_ns: 0.0,
                    seed: *s as u64,
                    ..SimClock::with_drift(*d)
                },
                link.clone(),
            )
        })
        .collect();
    let r = run_sync(&master, &slaves, 30.0, 0.1, 42).unwrap();
    for s in &r.slaves {
        assert_eq!(s.status, SyncStatus::Synchronized);
        assert!(s.p99_final_ns.unwrap() < 1000, "{}: {:?}", s.id, s.p99_final_ns);
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let link = LinkModel {
        drop_prob: 0.05,
        ..LinkModel::symmetric(10_000, 200.0)
    };
    let sl = [slave("a", SimClock::with_drift(20.0), link.clone()), slave("b", SimClock::with_drift(-33.0), link)];
    let a = run_sync(&SimClock::ideal(), &sl, 10.0, 0.1, 99).unwrap();
    let b = run_sync(&SimClock::ideal(), &sl, 10.0, 0.1, 99).unwrap();
    let c = run_sync(&SimClock::ideal(), &sl, 10.0, 0.1, 100).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn convergence_envelope_is_monotone_without_noise() {
    let link = LinkModel::symmetric(10_000, 0.0);
    for clock in [
        SimClock::with_offset(250_000),
        SimClock { offset0_ns: -80_000, ..SimClock::with_drift(45.0) },
        SimClock::with_drift(-50.0),
    ] {
        let r = run_sync(&SimClock::ideal(), &[slave("s", clock.clone(), link.clone())], 30.0, 0.1, 1).unwrap();
        let res: Vec<i64> = r.slaves[0].samples.iter().map(|s| s.residual_ns.abs()).collect();
        let windows: Vec<i64> = res.chunks(10).map(|w| *w.iter().max().unwrap()).collect();
        for k in 1..windows.len() - 1 {
            assert!(windows[k + 1] <= windows[k], "{clock:?}: window {k}: {windows:?}");
        }
    }
}

#[test]
fn all_dropped_is_unsynchronized() {
    let link = LinkModel {
        drop_prob: 1.0,
        ..LinkModel::symmetric(10_000, 0.0)
    };
    let r = run_sync(&SimClock::ideal(), &[slave("s", SimClock::with_offset(5), link)], 5.0, 0.1, 1).unwrap();
    assert_eq!(r.slaves[0].status, SyncStatus::Unsynchronized);
}
