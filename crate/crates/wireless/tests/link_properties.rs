use bciqoe_wireless::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn channel_mean_matches_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = sample_channel(&mut rng, 1_000_000, 1.0).unwrap();
    let mean = c.h.iter().sum::<f64>() / c.h.len() as f64;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    assert!(c.h.iter().all(|&h| h >= 0.0 && h.is_finite()));

    let mut a = ChaCha8Rng::seed_from_u64(3);
    let mut b = ChaCha8Rng::seed_from_u64(3);
    let one = sample_channel(&mut a, 1000, 1.0).unwrap();
    let two = sample_channel(&mut b, 1000, 2.0).unwrap();
    for (x, y) in one.h.iter().zip(&two.h) {
        assert!((2.0 * x - y).abs() <= 1e-12 * y.max(1.0));
    }
    assert!(sample_channel(&mut a, 3, 0.0).is_err());
}

#[test]
fn cpu_walk_stays_in_band() {
    let walk = CpuWalk {
        drift: 0.01,
        noise: 0.2,
        u_lo: 0.1,
        u_hi: 0.9,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut s = CpuLoadState::uniform(8, 0.5);
    for _ in 0..100_000 {
        s = step_cpu_load(&s, &mut rng, &walk);
        assert!(s.u.iter().all(|&u| (walk.u_lo..=walk.u_hi).contains(&u)));
    }
}

#[test]
fn frozen_walk_is_identity() {
    let walk = CpuWalk {
        drift: 0.0,
        noise: 0.0,
        ..CpuWalk::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = CpuLoadState {
        u: vec![0.2, 0.4, 0.9],
    };
    assert_eq!(step_cpu_load(&s, &mut rng, &walk), s);
}

#[test]
fn trace_replays_verbatim() {
    let csv = "t,u_1,u_2\n0,0.25,0.5\n1,0.125,0.75\n2,0.3,0.6\n";
    let trace = CpuTrace::from_reader(csv.as_bytes()).unwrap();
    assert_eq!(trace.len(), 3);
    let mut proc = CpuProcess::trace(trace.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let expected = [[0.25, 0.5], [0.125, 0.75], [0.3, 0.6], [0.25, 0.5]];
    for row in expected {
        assert_eq!(proc.current().u, row.to_vec());
        proc.advance(&mut rng);
    }
    let mut out = Vec::new();
    trace.write_csv(&mut out).unwrap();
    assert_eq!(CpuTrace::from_reader(out.as_slice()).unwrap(), trace);
}

fn params() -> NetworkParams {
    NetworkParams::default()
}

proptest! {
    #[test]
    fn dbm_round_trip(dbm in -200.0f64..100.0) {
        let back = watts_to_dbm(dbm_to_watts(dbm));
        prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        let w = dbm_to_watts(dbm);
        let again = dbm_to_watts(watts_to_dbm(w));
        prop_assert!(((again - w) / w).abs() < 1e-12);
    }

    #[test]
    fn per_in_unit_interval_and_decreasing(
        p in 1e-6f64..1.0, h in 1e-4f64..10.0, f in 1.01f64..10.0, blocks in 1usize..4
    ) {
        let pr = params();
        let mut rho = vec![false; pr.m];
        rho[..blocks].iter_mut().for_each(|b| *b = true);
        let e = uplink_per(&rho, p, h, &pr).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        let e_p = uplink_per(&rho, p * f, h, &pr).unwrap();
        let e_h = uplink_per(&rho, p, h * f, &pr).unwrap();
        // strict where the clamp is inactive and the value is representable
        if e < 1.0 && e > 1e-300 {
            prop_assert!(e_p < e && e_h < e);
        } else {
            prop_assert!(e_p <= e && e_h <= e);
        }
        let d = downlink_per(h, &pr);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(downlink_per(h * f, &pr) <= d);
    }

    #[test]
    fn rates_nonnegative_and_monotone(
        p in 0.0f64..1.0, h in 0.0f64..10.0, dp in 0.0f64..1.0, dh in 0.0f64..10.0
    ) {
        let pr = params();
        let rho = [true, true, false];
        let r = uplink_rate(&rho, p, h, &pr).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!(uplink_rate(&rho, p + dp, h, &pr).unwrap() >= r);
        prop_assert!(uplink_rate(&rho, p, h + dh, &pr).unwrap() >= r);
        let rd = downlink_rate(h, &pr);
        prop_assert!(rd >= 0.0 && downlink_rate(h + dh, &pr) >= rd);
    }

    #[test]
    fn round_trip_monotone(
        l_u in 1.0f64..1e6, l_d in 1.0f64..1e7, r_u in 1e3f64..1e8, r_d in 1e3f64..1e9,
        d in 0.0f64..1.0, f in 1.01f64..4.0
    ) {
        let base = round_trip_delay(l_u, r_u, Delay::Finite(d), l_d, r_d).seconds().unwrap();
        prop_assert!(base >= d);
        let faster_u = round_trip_delay(l_u, r_u * f, Delay::Finite(d), l_d, r_d).seconds().unwrap();
        let faster_d = round_trip_delay(l_u, r_u, Delay::Finite(d), l_d, r_d * f).seconds().unwrap();
        let bigger_u = round_trip_delay(l_u * f, r_u, Delay::Finite(d), l_d, r_d).seconds().unwrap();
        let bigger_d = round_trip_delay(l_u, r_u, Delay::Finite(d), l_d * f, r_d).seconds().unwrap();
        let slower = round_trip_delay(l_u, r_u, Delay::Finite(d * f + 1e-3), l_d, r_d).seconds().unwrap();
        prop_assert!(faster_u < base && faster_d < base);
        prop_assert!(bigger_u > base && bigger_d > base && slower > base);
    }

    #[test]
    fn processing_delay_scales_inversely(tau in 0.01f64..1.0, u in 0.01f64..0.99) {
        let pr = params();
        let d = processing_delay(tau, u, &pr).unwrap().seconds().unwrap();
        prop_assert!((d * tau * u * pr.upsilon - 1.0).abs() < 1e-12);
        let half = processing_delay(tau / 2.0, u, &pr).unwrap().seconds().unwrap();
        prop_assert!((half / d - 2.0).abs() < 1e-12);
    }
}
