use bciqoe_eeg::{CorruptionMode, EegSegment};
use bciqoe_env::*;
use bciqoe_wireless::{CpuWalk, LoadMode, NetworkParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seg(id: usize, user: usize, label: usize) -> EegSegment {
    EegSegment {
        id,
        user,
        label,
        channels: 1,
        width: 4,
        window: vec![id as f64, 1.0, -1.0, 0.5],
        normalized: true,
    }
}

fn small_net() -> NetworkParams {
    NetworkParams {
        m: 4,
        b_u: 1e6,
        b_d: 2e6,
        n0: 1e-12,
        i_m: 1e-6,
        i_d: 2e-6,
        p_b: 1.0,
        p_max: 0.1,
        z: 2e-3,
        sigma_u2: 1e-6,
        sigma_d2: 2e-6,
        upsilon: 1e4,
        d_max: 1.0,
        l_u: 2e5,
        l_d: 1e6,
        n_cpus: 4,
        load_mode: LoadMode::AsWritten,
    }
}

fn frozen_cfg(users: usize, h: Vec<f64>) -> EnvConfig {
    EnvConfig {
        users,
        fixed_h: Some(h),
        cpu: CpuWalk {
            noise: 0.0,
            ..CpuWalk::default()
        },
        cpu_start: 0.4,
        ..EnvConfig::default()
    }
}

fn two_user_action() -> ResourceAction {
    ResourceAction {
        rho: vec![0.75, 0.25],
        blocks: vec![0, 0, 0, 1],
        p: vec![0.05, 0.1],
        tau: vec![0.6, 0.4],
        phi_out: vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]],
    }
}

/// Straight-line evaluation of one step for the two-user instance above.
fn oracle(net: &NetworkParams, h: [f64; 2], u: f64, eta: (f64, f64)) -> ([f64; 2], [f64; 2], f64, [f64; 2]) {
    let blocks = [3.0, 1.0];
    let p = [0.05, 0.1];
    let tau = [0.6, 0.4];
    let correct = [1.0, 0.0]; // user 0 label 1 predicted 1, user 1 label 2 predicted 0
    let mut delay = [0.0; 2];
    let mut eps = [0.0; 2];
    for k in 0..2 {
        let sinr_u = p[k] * h[k] / (net.i_m + net.b_u * net.n0);
        let r_u = blocks[k] * net.b_u * (1.0 + sinr_u).ln() / 2f64.ln();
        let sinr_d = net.p_b * h[k] / (net.i_d + net.b_d * net.n0);
        let r_d = net.b_d * (1.0 + sinr_d).ln() / 2f64.ln();
        let per_block = 1.0 - (-net.z * net.sigma_u2 / (p[k] * h[k])).exp();
        eps[k] = (blocks[k] * per_block).min(1.0);
        let d = 1.0 / (tau[k] * u * net.upsilon);
        delay[k] = net.l_u / r_u + d + net.l_d / r_d;
    }
    let eps_star = eps[0].max(eps[1]);
    let mut q = [0.0; 2];
    for k in 0..2 {
        let psi = if delay[k] <= net.d_max { 1.0 } else { 0.0 };
        q[k] = eta.0 * psi + eta.1 * (1.0 - eps_star) * correct[k];
    }
    (delay, eps, eps_star, q)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn two_user_step_matches_straight_line_oracle() {
    let h = [0.8, 0.3];
    let mut net = small_net();
    let (d, _, _, _) = oracle(&net, h, 0.4, (1.0, 1.0));
    // put the deadline between the two users' delays so each indicator branch runs
    net.d_max = (d[0] * d[1]).sqrt();
    for eta in [(1.0, 1.0), (0.25, 1.0), (4.0, 1.0)] {
        let cfg = EnvConfig {
            eta1: eta.0,
            eta2: eta.1,
            ..frozen_cfg(2, h.to_vec())
        };
        let pools = vec![vec![seg(0, 0, 1)], vec![seg(1, 1, 2)]];
        let mut env = QoeEnv::new(cfg, net.clone(), 1.0, pools, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng).unwrap();
        let step = env.step(&two_user_action(), &mut rng).unwrap();
        let (delay, eps, eps_star, q) = oracle(&net, h, 0.4, eta);
        assert!(eps_star > 0.0 && eps_star < 1.0, "{eps_star}");
        assert!(close(step.record.eps_star, eps_star));
        for k in 0..2 {
            let u = &step.record.users[k];
            assert!(close(u.delay.seconds().unwrap(), delay[k]), "{:?} vs {}", u.delay, delay[k]);
            assert!(close(u.eps, eps[k]));
            assert!(close(u.q, q[k]), "user {k}: {} vs {}", u.q, q[k]);
        }
        assert_eq!(step.record.users[0].psi, 1.0);
        assert_eq!(step.record.users[1].psi, 0.0);
        assert!(close(step.record.mean_q, (q[0] + q[1]) / 2.0));
    }
}

fn env_with(users: usize, net: NetworkParams, cfg: EnvConfig, per_user: usize) -> QoeEnv {
    let pools = (0..users)
        .map(|k| (0..per_user).map(|i| seg(k * 100 + i, k, i % 3)).collect())
        .collect();
    QoeEnv::new(cfg, net, 1.0, pools, 3).unwrap()
}

#[test]
fn indicator_extremes_give_q_corners() {
    let net = small_net();
    // eps_star = 0 needs the waterfall exponent to underflow; eps_star = 1 needs zero power
    let clean = NetworkParams { sigma_u2: 1e-300, ..net.clone() };
    let mut env = env_with(2, clean, frozen_cfg(2, vec![1e300, 1e300]), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let obs = env.reset(&mut rng).unwrap();
    let labels: Vec<usize> = obs.segments.iter().map(|s| s.label).collect();
    let onehot = |c: usize| (0..3).map(|i| if i == c { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let mut a = two_user_action();
    a.phi_out = labels.iter().map(|&l| onehot(l)).collect();
    let rec = env.step(&a, &mut rng).unwrap().record;
    assert_eq!(rec.eps_star, 0.0);
    assert!(rec.users.iter().all(|u| u.q == 2.0));

    let mut env = env_with(2, net, frozen_cfg(2, vec![0.5, 0.5]), 3);
    env.reset(&mut rng).unwrap();
    a.p = vec![0.0, 0.0];
    let rec = env.step(&a, &mut rng).unwrap().record;
    assert_eq!(rec.eps_star, 1.0);
    assert!(rec.users.iter().all(|u| u.phi == 0.0 && u.psi == 0.0 && u.q == 0.0));
}

#[test]
fn starved_user_fails_deadline_without_error() {
    let mut env = env_with(2, small_net(), frozen_cfg(2, vec![1.0, 1.0]), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    env.reset(&mut rng).unwrap();
    let mut a = two_user_action();
    a.tau = vec![1.0, 0.0];
    let rec = env.step(&a, &mut rng).unwrap().record;
    assert_eq!(rec.users[1].psi, 0.0);
    assert_eq!(rec.users[1].delay.seconds(), None);
}

#[test]
fn reset_is_seeded_and_sorted() {
    let mut cfg = EnvConfig {
        users: 3,
        ..EnvConfig::default()
    };
    cfg.cpu.noise = 0.2;
    let mut env = env_with(3, NetworkParams::default(), cfg, 10);
    let a = env.clone().reset(&mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = env.reset(&mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.segments.len(), 3);
    assert_eq!(a.features().len(), env.feature_len());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let obs = env.observation();
        assert_eq!(obs.u_top.len(), 3);
        assert!(obs.u_top.windows(2).all(|w| w[0] <= w[1]));
        let raw: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
        let act = project_action(&raw, vec![vec![1.0 / 3.0; 3]; 3], 10, env.net().p_max);
        env.step(&act, &mut rng).unwrap();
    }
}

#[test]
fn few_cpus_shrink_u_top() {
    let net = NetworkParams {
        n_cpus: 2,
        ..NetworkParams::default()
    };
    let mut env = env_with(3, net, EnvConfig::default(), 4);
    let obs = env.reset(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(obs.u_top.len(), 2);
    assert_eq!(env.feature_len(), 5);
}

#[test]
fn sequential_pool_without_replay_exhausts() {
    let cfg = EnvConfig {
        users: 2,
        replay: false,
        order: DealOrder::Sequential,
        ..EnvConfig::default()
    };
    let mut env = env_with(2, NetworkParams::default(), cfg, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let obs = env.reset(&mut rng).unwrap();
    assert_eq!(obs.segments[1].id, 100);
    let act = project_action(&[0.0; 6], vec![vec![1.0 / 3.0; 3]; 2], 10, 0.1);
    let mut seen = vec![];
    loop {
        let step = env.step(&act, &mut rng).unwrap();
        seen.push(step.received[0].segment.id);
        if step.next.is_none() {
            break;
        }
    }
    assert_eq!(seen, vec![0, 1, 2]);
    assert!(matches!(env.step(&act, &mut rng), Err(EnvError::Exhausted(0))));
}

#[test]
fn sample_drop_zeroes_phi_of_dropped_users() {
    let cfg = EnvConfig {
        corruption: CorruptionMode::SampleDrop,
        ..frozen_cfg(2, vec![0.05, 0.05])
    };
    let net = NetworkParams { z: 250.0, ..small_net() };
    let mut env = env_with(2, net, cfg, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    env.reset(&mut rng).unwrap();
    let act = two_user_action();
    let mut drops = 0;
    for _ in 0..200 {
        let step = env
            .step_with(
                &act,
                |rx| rx.iter().map(|c| (0..3).map(|i| if i == c.segment.label { 1.0 } else { 0.0 }).collect()).collect(),
                &mut rng,
            )
            .unwrap();
        for (u, rx) in step.record.users.iter().zip(&step.received) {
            assert_eq!(u.phi, if rx.dropped { 0.0 } else { 1.0 });
            drops += rx.dropped as usize;
        }
    }
    assert!(drops > 0);
}

#[test]
fn step_log_writes_one_row_per_user() {
    let mut env = env_with(2, small_net(), frozen_cfg(2, vec![1.0, 1.0]), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    env.reset(&mut rng).unwrap();
    let mut a = two_user_action();
    a.tau = vec![1.0, 0.0];
    let rec = env.step(&a, &mut rng).unwrap().record;
    let mut buf = Vec::new();
    {
        let mut log = StepLog::new(&mut buf).unwrap();
        log.write(&rec).unwrap();
        log.flush().unwrap();
    }
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,k,D_k,psi,phi,eps_k,Q_k,mean_Q");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("0,1,inf,0,"));
}

fn check_feasible(a: &ResourceAction, k: usize, m: usize, p_max: f64) {
    a.validate(m, p_max).unwrap();
    assert_eq!(a.block_counts().iter().sum::<usize>(), m);
    assert_eq!(a.rho.len(), k);
}

#[test]
fn projection_feasibility_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    for i in 0..100_000 {
        let k = rng.random_range(1..6);
        let m = rng.random_range(1..25);
        let scale = [1.0, 10.0, 1e3, 1e300][i % 4];
        let raw: Vec<f64> = (0..3 * k).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        check_feasible(&project_action(&raw, vec![], m, 0.1), k, m, 0.1);
    }
    let nasty = [f64::INFINITY, f64::NEG_INFINITY, f64::NAN, f64::MAX, f64::MIN, 0.0];
    for a in nasty {
        for b in nasty {
            check_feasible(&project_action(&[a, b, a, b, a, b], vec![], 7, 0.1), 2, 7, 0.1);
        }
    }
}

fn random_state(rng: &mut ChaCha8Rng, k: usize) -> (Vec<f64>, ResourceAction) {
    let h: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..3.0)).collect();
    let raw: Vec<f64> = (0..3 * k).map(|_| rng.random_range(-4.0..4.0)).collect();
    let probs = (0..k)
        .map(|_| {
            let logits: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            softmax(&logits)
        })
        .collect();
    (h, project_action(&raw, probs, 10, 0.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_stays_in_range(seed in 0u64..10_000, eta1 in 0.0f64..5.0, eta2 in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, act) = random_state(&mut rng, 3);
        let cfg = EnvConfig { eta1, eta2, ..frozen_cfg(3, h) };
        let mut env = env_with(3, NetworkParams::default(), cfg, 4);
        env.reset(&mut rng).unwrap();
        let rec = env.step(&act, &mut rng).unwrap().record;
        for u in &rec.users {
            prop_assert!(u.q >= 0.0 && u.q <= eta1 + eta2 + 1e-12);
            prop_assert_eq!(u.q, eta1 * u.psi + eta2 * u.phi);
            if rec.eps_star == 0.0 || rec.eps_star == 1.0 {
                let corners = [0.0, eta1, eta2, eta1 + eta2];
                prop_assert!(corners.contains(&u.q));
            }
        }
        let mean = rec.users.iter().map(|u| u.q).sum::<f64>() / 3.0;
        prop_assert!((rec.mean_q - mean).abs() < 1e-15);
    }

    #[test]
    fn mean_q_is_permutation_invariant(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, act) = random_state(&mut rng, 3);
        let perm = [2usize, 0, 1];
        let permuted = ResourceAction {
            rho: perm.iter().map(|&i| act.rho[i]).collect(),
            blocks: act.blocks.iter().map(|&o| perm.iter().position(|&i| i == o).unwrap()).collect(),
            p: perm.iter().map(|&i| act.p[i]).collect(),
            tau: perm.iter().map(|&i| act.tau[i]).collect(),
            phi_out: perm.iter().map(|&i| act.phi_out[i].clone()).collect(),
        };
        let pools: Vec<Vec<EegSegment>> = (0..3).map(|k| vec![seg(k, k, k)]).collect();
        let run = |h: Vec<f64>, pools: Vec<Vec<EegSegment>>, a: &ResourceAction| {
            let mut env = QoeEnv::new(frozen_cfg(3, h), NetworkParams::default(), 1.0, pools, 3).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(0);
            env.reset(&mut r).unwrap();
            env.step(a, &mut r).unwrap().record.mean_q
        };
        let base = run(h.clone(), pools.clone(), &act);
        let ph = perm.iter().map(|&i| h[i]).collect();
        let pp = perm.iter().map(|&i| pools[i].clone()).collect();
        let other = run(ph, pp, &permuted);
        prop_assert!((base - other).abs() < 1e-12, "{} vs {}", base, other);
    }

    #[test]
    fn step_is_deterministic(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, act) = random_state(&mut rng, 3);
        let mut env = env_with(3, NetworkParams::default(), EnvConfig { corruption: CorruptionMode::SampleDrop, ..EnvConfig::default() }, 5);
        env.reset(&mut rng).unwrap();
        let mut twin = env.clone();
        let mut r2 = rng.clone();
        for _ in 0..5 {
            let a = env.step(&act, &mut rng).unwrap();
            let b = twin.step(&act, &mut r2).unwrap();
            prop_assert_eq!(a.record, b.record);
            prop_assert_eq!(a.next, b.next);
        }
    }

    #[test]
    fn more_power_never_hurts(seed in 0u64..10_000, factor in 1.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, act) = random_state(&mut rng, 3);
        let net = NetworkParams::default();
        let mut louder = act.clone();
        louder.p.iter_mut().for_each(|p| *p = (*p * factor).min(net.p_max));
        let a = link_outcome(&net, &h, 0.5, &act).unwrap();
        let b = link_outcome(&net, &h, 0.5, &louder).unwrap();
        for k in 0..3 {
            prop_assert!(b.psi[k] >= a.psi[k]);
            prop_assert!(b.eps[k] <= a.eps[k]);
        }
    }
}
