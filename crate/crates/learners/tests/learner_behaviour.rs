use bciqoe_autodiff::{sgd_step, Adam, AdamConfig, ParamSet, Tensor};
use bciqoe_eeg::EegSegment;
use bciqoe_env::{DealOrder, EnvConfig, QoeEnv};
use bciqoe_learners::*;
use bciqoe_wireless::{LoadMode, NetworkParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CH: usize = 2;
const W: usize = 8;

/// Class 0 is a rising ramp on channel 0, class 1 a falling one on channel 1.
fn segment(id: usize, user: usize, label: usize, rng: &mut ChaCha8Rng) -> EegSegment {
    let mut window = vec![0.0; CH * W];
    for t in 0..W {
        let ramp = t as f64 / W as f64 - 0.5;
        window[label * W + t] = if label == 0 { ramp } else { -ramp } * 2.0;
        for j in 0..CH {
            window[j * W + t] += 0.1 * (rng.random::<f64>() - 0.5);
        }
    }
    EegSegment {
        id,
        user,
        label,
        channels: CH,
        width: W,
        window,
        normalized: true,
    }
}

fn pools(users: usize, per_user: usize, seed: u64) -> Vec<Vec<EegSegment>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..users)
        .map(|k| (0..per_user).map(|i| segment(k * per_user + i, k, i % 2, &mut rng)).collect())
        .collect()
}

fn net() -> NetworkParams {
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
        d_max: 0.5,
        l_u: 2e5,
        l_d: 1e6,
        n_cpus: 4,
        load_mode: LoadMode::AsWritten,
    }
}

fn env(users: usize, per_user: usize, order: DealOrder) -> QoeEnv {
    let cfg = EnvConfig {
        users,
        order,
        ..EnvConfig::default()
    };
    QoeEnv::new(cfg, net(), 1.0, pools(users, per_user, 7), 2).unwrap()
}

fn cfg(kind: LearnerKind, horizon: usize) -> LearnerConfig {
    LearnerConfig {
        kind,
        hidden: vec![8],
        horizon,
        minibatch: 5,
        epochs: 2,
        cnn: CnnConfig {
            filters1: 4,
            filters2: 4,
            kernel: 3,
            pool: 2,
        },
        svm: SvmConfig {
            steps: 200,
            ..SvmConfig::default()
        },
        ..LearnerConfig::default()
    }
}

fn setup(kind: LearnerKind, horizon: usize, seed: u64) -> (Learner, QoeEnv, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = env(2, 40, DealOrder::Shuffled);
    e.reset(&mut rng).unwrap();
    let l = Learner::new(cfg(kind, horizon), &e, &mut rng).unwrap();
    (l, e, rng)
}

#[test]
fn single_step_trajectory() {
    for kind in LearnerKind::ALL {
        let (l, mut e, mut rng) = setup(kind, 1, 1);
        let traj = l.collect(&mut e, 1, &mut rng).unwrap();
        assert_eq!(traj.len(), 1);
        let s = &traj.steps[0];
        assert_eq!(s.features.len(), e.feature_len());
        assert_eq!(s.raw.len(), 3 * 2);
        assert_eq!(s.received.len(), 2);
        assert!((0.0..=2.0).contains(&s.reward));
        assert_eq!(s.classes.len(), if kind.reward_only() { 2 } else { 0 });
    }
}

#[test]
fn recorded_log_prob_matches_reevaluation() {
    for kind in [LearnerKind::Hybrid, LearnerKind::PpoRewardOnly] {
        let (l, mut e, mut rng) = setup(kind, 10, 2);
        let traj = l.collect(&mut e, 10, &mut rng).unwrap();
        for s in &traj.steps {
            let lp = l.actor.log_prob(&s.features, &s.raw, &s.classes).unwrap();
            assert!((lp - s.log_prob).abs() < 1e-10, "{lp} vs {}", s.log_prob);
        }
        // The batched tape path agrees with the scalar one.
        let batch = Batch::new(&traj, &l.cfg).unwrap();
        let mut tape = bciqoe_autodiff::Tape::new();
        let vars = l.actor.params.register(&mut tape);
        let idx: Vec<usize> = (0..traj.len()).collect();
        let classes: Vec<usize> = traj.steps.iter().flat_map(|s| s.classes.clone()).collect();
        let lp = l
            .actor
            .log_prob_on_tape(&mut tape, &vars, &batch.features.gather_rows(&idx), &batch.raw, &classes)
            .unwrap();
        for (a, s) in tape.value(lp).data().iter().zip(&traj.steps) {
            assert!((a - s.log_prob).abs() < 1e-10);
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let run = |seed| {
        let (mut l, mut e, mut rng) = setup(LearnerKind::Hybrid, 10, seed);
        let stats: Vec<f64> = (0..3).map(|_| l.train_episode(&mut e, &mut rng).unwrap().mean_q).collect();
        (stats, l.actor.params.clone(), l.classifier().unwrap().params.clone())
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).0, run(6).0);
}

#[test]
fn zero_advantage_leaves_actor_unchanged() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::PpoRewardOnly, 10, 3);
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    let mut batch = Batch::new(&traj, &l.cfg).unwrap();
    batch.advantages.iter_mut().for_each(|a| *a = 0.0);
    let before = l.actor.params.clone();
    let mut opt = Adam::new(AdamConfig::with_lr(1e-2), &l.actor.params).unwrap();
    let idx: Vec<usize> = (0..10).collect();
    actor_ppo_step(&mut l.actor, &mut opt, &batch, &idx, 0.2).unwrap().unwrap();
    assert_eq!(l.actor.params, before);
}

#[test]
fn perfect_critic_is_a_fixed_point() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::Hybrid, 10, 4);
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    let mut batch = Batch::new(&traj, &l.cfg).unwrap();
    batch.critic_targets = traj.values();
    let before = l.critic.params.clone();
    let mut opt = Adam::new(AdamConfig::with_lr(1e-2), &l.critic.params).unwrap();
    let idx: Vec<usize> = (0..10).collect();
    let loss = critic_step(&mut l.critic, &mut opt, &batch, &idx).unwrap();
    assert!(loss < 1e-24);
    assert!(l.critic.params.max_abs_diff(&before).unwrap() < 1e-12);
}

#[test]
fn critic_loss_decreases() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::Hybrid, 20, 5);
    let traj = l.collect(&mut e, 20, &mut rng).unwrap();
    let batch = Batch::new(&traj, &l.cfg).unwrap();
    let mut opt = Adam::new(AdamConfig::with_lr(1e-2), &l.critic.params).unwrap();
    let idx: Vec<usize> = (0..20).collect();
    let first = critic_step(&mut l.critic, &mut opt, &batch, &idx).unwrap();
    let mut last = first;
    for _ in 0..50 {
        last = critic_step(&mut l.critic, &mut opt, &batch, &idx).unwrap();
    }
    assert!(last < 0.5 * first, "{first} -> {last}");
}

fn manual_ce(cls: &Classifier, params: &ParamSet, data: &LabeledBatch) -> f64 {
    let x = cls.batch(data.segments.iter().copied()).unwrap();
    let logits = cls.logits(params, &x).unwrap();
    let c = cls.classes;
    logits
        .data()
        .chunks(c)
        .zip(&data.labels)
        .zip(&data.weights)
        .map(|((row, &y), &w)| {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            w * (lse - row[y])
        })
        .sum()
}

#[test]
fn clean_weights_give_standard_cross_entropy() {
    let (l, mut e, mut rng) = setup(LearnerKind::Hybrid, 10, 6);
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    let cls = l.classifier().unwrap();
    let mut data = LabeledBatch::from_steps(&traj, &[0, 1, 2, 3]);
    data.weights.iter_mut().for_each(|w| *w = 1.0);
    let (loss, _) = classifier_grads(cls, &cls.params, &data).unwrap();
    assert!((loss - manual_ce(cls, &cls.params, &data)).abs() < 1e-12);

    // Fully corrupted samples carry no gradient.
    data.weights.iter_mut().for_each(|w| *w = 0.0);
    let (loss, grads) = classifier_grads(cls, &cls.params, &data).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn weighted_loss_scales_with_weights() {
    let (l, mut e, mut rng) = setup(LearnerKind::Hybrid, 10, 7);
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    let cls = l.classifier().unwrap();
    let data = LabeledBatch::from_steps(&traj, &[0, 1, 2]);
    let (loss, _) = classifier_grads(cls, &cls.params, &data).unwrap();
    assert!((loss - manual_ce(cls, &cls.params, &data)).abs() < 1e-12);
    assert!(data.weights.iter().all(|w| (0.0..=1.0).contains(w)));
}

#[test]
fn meta_inner_single_batch_is_one_sgd_step() {
    let (l, mut e, mut rng) = setup(LearnerKind::Meta, 10, 8);
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    let cls = l.classifier().unwrap();
    let data = LabeledBatch::for_user(&traj, 0);
    let (adapted, _) = meta_inner(cls, &cls.params, std::slice::from_ref(&data), 2e-3).unwrap();
    let mut expect = cls.params.clone();
    let (_, g) = classifier_grads(cls, &cls.params, &data).unwrap();
    sgd_step(&mut expect, &g, 2e-3).unwrap();
    assert_eq!(adapted, expect);

    // Several batches replay as sequential steps.
    let batches: Vec<LabeledBatch> = split_minibatches(&(0..10).collect::<Vec<_>>(), 3)
        .iter()
        .map(|ix| data.subset(ix))
        .collect();
    let (adapted, _) = meta_inner(cls, &cls.params, &batches, 2e-3).unwrap();
    let mut p = cls.params.clone();
    for b in &batches {
        let (_, g) = classifier_grads(cls, &p, b).unwrap();
        sgd_step(&mut p, &g, 2e-3).unwrap();
    }
    assert_eq!(adapted, p);
}

#[test]
fn meta_inner_with_zero_weights_is_identity() {
    let (l, mut e, mut rng) = setup(LearnerKind::Meta, 10, 9);
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    let cls = l.classifier().unwrap();
    let mut data = LabeledBatch::for_user(&traj, 1);
    data.weights.iter_mut().for_each(|w| *w = 0.0);
    let (adapted, _) = meta_inner(cls, &cls.params, &[data.subset(&[0, 1]), data.subset(&[2, 3])], 2e-3).unwrap();
    assert_eq!(adapted, cls.params);
}

fn single(v: f64) -> ParamSet {
    ParamSet::new(vec![("w".into(), Tensor::from_vec(vec![v, -v]))])
}

#[test]
fn meta_update_examples() {
    let start = single(1.0);
    // One user and full step size lands on the adapted weights exactly.
    assert_eq!(meta_update(&start, &[single(3.7)], 1.0).unwrap(), single(3.7));
    // No adaptation, no change.
    assert_eq!(meta_update(&start, &[start.clone(), start.clone()], 0.7).unwrap(), start);
    // Symmetric adaptations cancel.
    let out = meta_update(&start, &[single(1.5), single(0.5)], 0.5).unwrap();
    assert!(out.max_abs_diff(&start).unwrap() < 1e-15);
    // Half-way toward the mean.
    let out = meta_update(&start, &[single(2.0), single(4.0)], 0.5).unwrap();
    assert!(out.max_abs_diff(&single(2.0)).unwrap() < 1e-15);
}

#[test]
fn meta_needs_w_samples_per_user() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::Meta, 2, 10);
    let traj = l.collect(&mut e, 2, &mut rng).unwrap();
    match l.update(&traj, &mut rng) {
        Err(LearnerError::InsufficientData { have: 2, need: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn minibatch_split_sizes() {
    let order: Vec<usize> = (0..10).collect();
    let parts = split_minibatches(&order, 3);
    let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![4, 3, 3]);
    assert_eq!(parts.concat(), order);
}

fn dot(a: &[Tensor], b: &[Tensor]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

#[test]
fn policy_gradient_and_clipped_surrogate_agree_at_ratio_one() {
    let (l, mut e, mut rng) = setup(LearnerKind::Vpg, 1, 11);
    let traj = l.collect(&mut e, 1, &mut rng).unwrap();
    let mut c = l.cfg.clone();
    c.normalize_advantages = false;
    let mut batch = Batch::new(&traj, &c).unwrap();
    for adv in [0.8, -0.6] {
        batch.advantages = vec![adv];
        let (_, g_ppo) = ppo_actor_grads(&l.actor, &l.actor.params, &batch, &[0], 0.2).unwrap().unwrap();
        let (_, g_pg) = reinforce_grads(&l.actor, &l.actor.params, &batch, &[0], &[adv]).unwrap();
        let cos = dot(&g_ppo, &g_pg) / (dot(&g_ppo, &g_ppo) * dot(&g_pg, &g_pg)).sqrt();
        assert!((cos - 1.0).abs() < 1e-9, "{cos}");
        assert!((dot(&g_ppo, &g_ppo) - dot(&g_pg, &g_pg)).abs() < 1e-9 * dot(&g_pg, &g_pg));
    }
}

#[test]
fn clipped_region_has_no_gradient() {
    let (l, mut e, mut rng) = setup(LearnerKind::Hybrid, 1, 12);
    let traj = l.collect(&mut e, 1, &mut rng).unwrap();
    let mut batch = Batch::new(&traj, &l.cfg).unwrap();
    batch.advantages = vec![1.0];
    // Pretend the old policy made this action far less likely.
    batch.old_log_prob[0] -= 1.0;
    let (loss, g) = ppo_actor_grads(&l.actor, &l.actor.params, &batch, &[0], 0.2).unwrap().unwrap();
    assert!((loss + 1.2).abs() < 1e-12);
    assert!(g.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn reward_only_update_touches_class_head() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::PpoRewardOnly, 10, 13);
    let before = l.actor.params.clone();
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    l.update(&traj, &mut rng).unwrap();
    for (name, t) in l.actor.params.iter() {
        if name.starts_with("class.") || name.starts_with("mean.") {
            assert_ne!(t, before.get(name).unwrap(), "{name}");
        }
    }
}

#[test]
fn hybrid_update_leaves_classifier_out_of_policy_gradient() {
    let (l, mut e, mut rng) = setup(LearnerKind::Hybrid, 10, 14);
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    assert!(!l.actor.has_class_head());
    assert!(l.actor.params.names().iter().all(|n| !n.starts_with("class.")));
    // Classifier gradients do not depend on the allocation policy's parameters.
    let cls = l.classifier().unwrap();
    let data = LabeledBatch::from_steps(&traj, &[0, 1]);
    let a = classifier_grads(cls, &cls.params, &data).unwrap();
    let mut l2 = l.clone();
    l2.actor.params.tensors_mut()[0].data_mut()[0] += 1.0;
    let b = classifier_grads(l2.classifier().unwrap(), &cls.params, &data).unwrap();
    assert_eq!(a.0, b.0);
}

#[test]
fn hybrid_learns_an_easy_task() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::Hybrid, 20, 15);
    let pool: Vec<EegSegment> = e.pools().concat();
    let before = l.accuracy_on(&pool).unwrap();
    for _ in 0..15 {
        l.train_episode(&mut e, &mut rng).unwrap();
    }
    let after = l.accuracy_on(&pool).unwrap();
    assert!(after > 0.9, "{before} -> {after}");
}

#[test]
fn evaluation_runs_to_exhaustion() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut e = env(2, 12, DealOrder::Sequential);
    e = QoeEnv::new(
        EnvConfig {
            replay: false,
            ..e.config().clone()
        },
        net(),
        1.0,
        e.pools().to_vec(),
        2,
    )
    .unwrap();
    let mut c = cfg(LearnerKind::Hybrid, 5);
    c.horizon = 5;
    let l = Learner::new(c, &e, &mut rng).unwrap();
    let s = l.evaluate(&mut e, 1000, &mut rng).unwrap();
    assert_eq!(s.steps, 12);
    assert_eq!(s.step_q.len(), 12);
    let s = l.evaluate(&mut e, 4, &mut rng).unwrap();
    assert_eq!(s.steps, 4);
}

#[test]
fn ideal_classifier_is_always_right() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut e = env(2, 20, DealOrder::Shuffled);
    let l = Learner::with_ideal_classifier(cfg(LearnerKind::Hybrid, 10), &e, &mut rng).unwrap();
    e.reset(&mut rng).unwrap();
    let traj = l.collect(&mut e, 10, &mut rng).unwrap();
    assert_eq!(traj.accuracy(), 1.0);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [LearnerKind::Hybrid, LearnerKind::Svm, LearnerKind::PpoRewardOnly] {
        let (mut l, mut e, mut rng) = setup(kind, 10, 18);
        l.train_episode(&mut e, &mut rng).unwrap();
        let path = dir.path().join(format!("{}.ckpt", kind.name()));
        l.save(&path).unwrap();
        let mut other = Learner::new(cfg(kind, 10), &e, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        other.load(&path).unwrap();
        assert_eq!(other.actor.params, l.actor.params);
        assert_eq!(other.critic.params, l.critic.params);
        match (&other.source, &l.source) {
            (ClassSource::Cnn { net: a, .. }, ClassSource::Cnn { net: b, .. }) => assert_eq!(a.params, b.params),
            (ClassSource::Svm(a), ClassSource::Svm(b)) => assert_eq!(a.model, b.model),
            (ClassSource::Policy, ClassSource::Policy) => {}
            _ => panic!("source kind changed"),
        }
    }
    // A mismatched architecture is refused.
    let (l, e, mut rng) = setup(LearnerKind::Hybrid, 10, 19);
    let path = dir.path().join("h.ckpt");
    l.save(&path).unwrap();
    let mut c = cfg(LearnerKind::Hybrid, 10);
    c.hidden = vec![9];
    let mut other = Learner::new(c, &e, &mut rng).unwrap();
    assert!(matches!(other.load(&path), Err(LearnerError::Checkpoint(_))));
}

#[test]
fn training_log_rows() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::Hybrid, 10, 20);
    let mut buf = Vec::new();
    {
        let mut log = TrainingLog::new(&mut buf).unwrap();
        for _ in 0..2 {
            log.write(&l.train_episode(&mut e, &mut rng).unwrap()).unwrap();
        }
        log.flush().unwrap();
    }
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "episode,mean_Q,train_acc,mean_delay,actor_loss,critic_loss,ce_loss");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("1,"));
}

fn clusters(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Vec<f64>, usize)> {
    let centres = [[2.0, 0.0], [-2.0, 0.0], [0.0, 2.0]];
    (0..n)
        .map(|i| {
            let c = i % 3;
            let x = centres[c].iter().map(|v| v + 0.3 * (rng.random::<f64>() - 0.5)).collect();
            (x, c)
        })
        .collect()
}

#[test]
fn svm_separates_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = clusters(&mut rng, 150);
    let mut svm = LinearSvm::new(2, 3);
    svm.sgd(&data, 5000, 1e-2, 1e-4, &mut rng);
    assert_eq!(svm.accuracy(&data), 1.0);
}

#[test]
fn svm_cannot_solve_xor() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let data: Vec<(Vec<f64>, usize)> = (0..200)
        .map(|i| {
            let (a, b) = (i % 2, (i / 2) % 2);
            let x = vec![a as f64 * 2.0 - 1.0, b as f64 * 2.0 - 1.0];
            (x, a ^ b)
        })
        .collect();
    let mut svm = LinearSvm::new(2, 2);
    svm.sgd(&data, 5000, 1e-2, 1e-4, &mut rng);
    assert!(svm.accuracy(&data) <= 0.75);
}

#[test]
fn svm_store_grows_with_episodes() {
    let (mut l, mut e, mut rng) = setup(LearnerKind::Svm, 5, 23);
    let mut sizes = vec![];
    for _ in 0..4 {
        l.train_episode(&mut e, &mut rng).unwrap();
        let ClassSource::Svm(svm) = &l.source else { unreachable!() };
        sizes.push(svm.store.len());
    }
    assert_eq!(sizes, vec![10, 20, 30, 40]);
}

proptest! {
    #[test]
    fn gae_is_linear(d1 in prop::collection::vec(-5.0..5.0f64, 1..20), a in -3.0..3.0f64, gl in 0.0..1.0f64) {
        let d2: Vec<f64> = d1.iter().map(|x| x * 0.5 - 1.0).collect();
        let sum: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + y).collect();
        for mode in [GaeMode::Printed, GaeMode::Standard] {
            let lhs = gae(&sum, 1.0, gl, mode);
            let g1 = gae(&d1, 1.0, gl, mode);
            let g2 = gae(&d2, 1.0, gl, mode);
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * g1[i] + g2[i])).abs() < 1e-9);
            }
        }
        let scalar = scalar_advantage(&d1, 1.0, gl);
        let direct: f64 = d1.iter().enumerate().map(|(o, d)| gl.powi(o as i32 + 1) * d).sum();
        prop_assert!((scalar - direct).abs() < 1e-9);
    }

    #[test]
    fn clipped_objective_depends_only_on_log_ratio(new in -5.0..5.0f64, old in -5.0..5.0f64, shift in -50.0..50.0f64, adv in -3.0..3.0f64) {
        let a = clipped_objective((new - old).exp(), adv, 0.2);
        let b = clipped_objective(((new + shift) - (old + shift)).exp(), adv, 0.2);
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        prop_assert!(a <= clip_bound(0.2, adv) + 1e-15);
    }

    #[test]
    fn normalized_advantages_are_standard(xs in prop::collection::vec(-10.0..10.0f64, 2..30)) {
        let mut v = xs.clone();
        normalize(&mut v);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        let var = v.iter().map(|x| x * x).sum::<f64>() / n;
        prop_assert!(var < 1.0 + 1e-9);
    }
}
