use std::path::Path;

use bciqoe_autodiff::{checkpoint, Adam, AdamConfig, ParamSet, Tensor};
use bciqoe_eeg::CorruptedSegment;
use bciqoe_env::{argmax, project_action, QoeEnv};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{LearnerConfig, LearnerKind};
use crate::error::{LearnerError, Result};
use crate::nets::{Actor, ActorSample, Classifier, Critic};
use crate::svm::SvmClassifier;
use crate::trajectory::{mean, Trajectory, Transition};
use crate::update::{
    actor_ppo_step, critic_step, classifier_step, meta_inner, meta_update, reinforce_grads, split_minibatches,
    Batch, LabeledBatch,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// Per-sample weighted cross-entropy.
    pub ce_loss: f64,
    /// Policy steps dropped for a non-finite density ratio.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_q: f64,
    pub train_acc: f64,
    pub mean_delay: f64,
    pub delay_ok: f64,
    pub update: UpdateStats,
    /// Mean QoE of every step in the episode.
    pub step_q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub steps: usize,
    pub mean_q: f64,
    pub accuracy: f64,
    pub mean_delay: f64,
    pub delay_ok: f64,
    pub mean_phi: f64,
    /// Mean QoE of every evaluated step.
    pub step_q: Vec<f64>,
}

/// Where the class distributions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassSource {
    Cnn { net: Classifier, opt: Adam },
    Svm(SvmClassifier),
    /// The actor's categorical head.
    Policy,
    /// Always the true label, for isolating the allocation problem.
    Ideal,
}

fn one_hot(c: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == c { 1.0 } else { 0.0 }).collect()
}

fn accumulate(acc: &mut (f64, usize), v: f64) {
    acc.0 += v;
    acc.1 += 1;
}

fn average(acc: (f64, usize)) -> f64 {
    if acc.1 == 0 {
        0.0
    } else {
        acc.0 / acc.1 as f64
    }
}

/// Actor, critic and class source trained together on one environment.
#[derive(Debug, Clone)]
pub struct Learner {
    pub cfg: LearnerConfig,
    pub actor: Actor,
    actor_opt: Adam,
    pub critic: Critic,
    critic_opt: Adam,
    pub source: ClassSource,
    users: usize,
    classes: usize,
    m: usize,
    p_max: f64,
    episodes: usize,
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(cfg: LearnerConfig, env: &QoeEnv, rng: &mut R) -> Result<Self> {
        Self::build(cfg, env, false, rng)
    }

    /// A learner whose class predictions are always correct; only the
    /// allocation policy is learned.
    pub fn with_ideal_classifier<R: Rng + ?Sized>(cfg: LearnerConfig, env: &QoeEnv, rng: &mut R) -> Result<Self> {
        Self::build(cfg, env, true, rng)
    }

    fn build<R: Rng + ?Sized>(cfg: LearnerConfig, env: &QoeEnv, ideal: bool, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let (users, classes) = (env.users(), env.classes());
        let inputs = env.feature_len();
        let reward_only = cfg.kind.reward_only() && !ideal;
        let actor = Actor::new(
            inputs,
            users,
            &cfg.hidden,
            cfg.log_std_init,
            reward_only.then_some(classes),
            rng,
        )?;
        let critic = Critic::new(inputs, &cfg.hidden, rng)?;
        let seg = &env.pools()[0][0];
        let source = match cfg.kind {
            _ if ideal => ClassSource::Ideal,
            LearnerKind::Hybrid | LearnerKind::Meta => {
                let net = Classifier::new(&cfg.cnn, seg.channels, seg.width, classes, rng)?;
                let opt = Adam::new(AdamConfig::with_lr(cfg.classifier_lr), &net.params)?;
                ClassSource::Cnn { net, opt }
            }
            LearnerKind::Svm => ClassSource::Svm(SvmClassifier::new(cfg.svm.clone(), seg.channels * seg.width, classes)),
            LearnerKind::Vpg | LearnerKind::PpoRewardOnly => ClassSource::Policy,
        };
        Ok(Self {
            actor_opt: Adam::new(AdamConfig::with_lr(cfg.actor_lr), &actor.params)?,
            critic_opt: Adam::new(AdamConfig::with_lr(cfg.critic_lr), &critic.params)?,
            actor,
            critic,
            source,
            users,
            classes,
            m: env.net().m,
            p_max: env.net().p_max,
            episodes: 0,
            cfg,
        })
    }

    pub fn kind(&self) -> LearnerKind {
        self.cfg.kind
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn classifier(&self) -> Option<&Classifier> {
        match &self.source {
            ClassSource::Cnn { net, .. } => Some(net),
            _ => None,
        }
    }

    /// Class distributions for what arrived this step.
    pub fn classify(&self, received: &[CorruptedSegment], sample: &ActorSample, fallback: &[usize]) -> Result<Vec<Vec<f64>>> {
        match &self.source {
            ClassSource::Ideal => Ok(received.iter().map(|r| one_hot(r.segment.label, self.classes)).collect()),
            ClassSource::Policy => Ok(sample.classes.iter().map(|&c| one_hot(c, self.classes)).collect()),
            ClassSource::Cnn { net, .. } => net.probs(&net.batch(received.iter().map(|r| &r.segment))?),
            ClassSource::Svm(svm) => Ok(received
                .iter()
                .zip(fallback)
                .map(|(r, &f)| one_hot(svm.predict(&r.segment.window, f), self.classes))
                .collect()),
        }
    }

    fn fallback<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        match &self.source {
            ClassSource::Svm(svm) if !svm.fitted() => (0..self.users).map(|_| rng.random_range(0..self.classes)).collect(),
            _ => vec![0; self.users],
        }
    }

    fn run_step<R: Rng + ?Sized>(
        &self,
        env: &mut QoeEnv,
        features: Vec<f64>,
        deterministic: bool,
        rng: &mut R,
    ) -> Result<(Transition, Option<bciqoe_env::Observation>)> {
        let sample = self.actor.act(&features, deterministic, rng)?;
        let value = self.critic.value(&features)?;
        let fallback = self.fallback(rng);
        let action = project_action(&sample.raw, vec![], self.m, self.p_max);
        let mut failure = None;
        let uniform = vec![vec![1.0 / self.classes as f64; self.classes]; self.users];
        let step = env.step_with(
            &action,
            |rx| match self.classify(rx, &sample, &fallback) {
                Ok(p) => p,
                Err(e) => {
                    failure = Some(e);
                    uniform
                }
            },
            rng,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        let rec = &step.record;
        let t = Transition {
            features,
            raw: sample.raw,
            classes: sample.classes,
            log_prob: sample.log_prob,
            value,
            q: rec.users.iter().map(|u| u.q).collect(),
            reward: rec.mean_q,
            eps_star: rec.eps_star,
            received: step.received.into_iter().map(|r| r.segment).collect(),
            labels: rec.users.iter().map(|u| u.label).collect(),
            predicted: rec.users.iter().map(|u| u.predicted).collect(),
            delays: rec.users.iter().map(|u| u.delay.seconds_or_inf()).collect(),
            psi: rec.users.iter().map(|u| u.psi).collect(),
            phi: rec.users.iter().map(|u| u.phi).collect(),
        };
        Ok((t, step.next))
    }

    /// Runs the stochastic policy for up to `O` steps from the env's current state.
    pub fn collect<R: Rng + ?Sized>(&self, env: &mut QoeEnv, horizon: usize, rng: &mut R) -> Result<Trajectory> {
        let mut obs = env.observation();
        let mut traj = Trajectory::default();
        for _ in 0..horizon {
            let (t, next) = self.run_step(env, obs.features(), false, rng)?;
            traj.steps.push(t);
            match next {
                Some(n) => obs = n,
                None => {
                    traj.done = true;
                    break;
                }
            }
        }
        traj.last_value = if traj.done { 0.0 } else { self.critic.value(&obs.features())? };
        Ok(traj)
    }

    /// One round of the meta-learner's classifier update.
    fn meta_round<R: Rng + ?Sized>(&mut self, traj: &Trajectory, rng: &mut R) -> Result<(f64, usize)> {
        let ClassSource::Cnn { net, .. } = &mut self.source else {
            return Ok((0.0, 0));
        };
        let w = self.cfg.meta.w;
        let start = net.params.clone();
        let mut adapted = Vec::with_capacity(self.users);
        let (mut loss, mut count) = (0.0, 0);
        for k in 0..self.users {
            let data = LabeledBatch::for_user(traj, k);
            if data.len() < w {
                return Err(LearnerError::InsufficientData {
                    user: k,
                    have: data.len(),
                    need: w,
                });
            }
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(rng);
            let batches: Vec<LabeledBatch> = split_minibatches(&order, w).iter().map(|ix| data.subset(ix)).collect();
            let (p, l) = meta_inner(net, &start, &batches, self.cfg.meta.inner_lr)?;
            loss += l * w as f64;
            count += data.len();
            adapted.push(p);
        }
        net.params = meta_update(&start, &adapted, self.cfg.meta.alpha_m)?;
        Ok((loss, count))
    }

    /// Updates every network from one trajectory.
    pub fn update<R: Rng + ?Sized>(&mut self, traj: &Trajectory, rng: &mut R) -> Result<UpdateStats> {
        let batch = Batch::new(traj, &self.cfg)?;
        let n = batch.len();
        let all: Vec<usize> = (0..n).collect();
        let (mut actor, mut critic) = ((0.0, 0), (0.0, 0));
        let (mut ce_sum, mut ce_n) = (0.0, 0usize);
        let mut skipped = 0;
        if self.cfg.kind == LearnerKind::Vpg {
            let weights: Vec<f64> = batch.returns.iter().zip(traj.values()).map(|(g, v)| g - v).collect();
            let (loss, grads) = reinforce_grads(&self.actor, &self.actor.params, &batch, &all, &weights)?;
            self.actor_opt.step(&mut self.actor.params, &grads)?;
            accumulate(&mut actor, loss);
        }
        for _ in 0..self.cfg.epochs {
            let mut order = all.clone();
            order.shuffle(rng);
            for chunk in order.chunks(self.cfg.minibatch) {
                if self.cfg.kind != LearnerKind::Vpg {
                    match actor_ppo_step(&mut self.actor, &mut self.actor_opt, &batch, chunk, self.cfg.clip)? {
                        Some(l) => accumulate(&mut actor, l),
                        None => skipped += 1,
                    }
                }
                accumulate(&mut critic, critic_step(&mut self.critic, &mut self.critic_opt, &batch, chunk)?);
                if self.cfg.kind == LearnerKind::Hybrid {
                    if let ClassSource::Cnn { net, opt } = &mut self.source {
                        let data = LabeledBatch::from_steps(traj, chunk);
                        ce_sum += classifier_step(net, opt, &data)?;
                        ce_n += data.len();
                    }
                }
            }
            if self.cfg.kind == LearnerKind::Meta {
                let (l, c) = self.meta_round(traj, rng)?;
                ce_sum += l;
                ce_n += c;
            }
        }
        if let ClassSource::Svm(svm) = &mut self.source {
            for s in &traj.steps {
                for (seg, &label) in s.received.iter().zip(&s.labels) {
                    svm.store.push(seg.window.clone(), label, rng);
                }
            }
            svm.refit(rng);
        }
        Ok(UpdateStats {
            actor_loss: average(actor),
            critic_loss: average(critic),
            ce_loss: if ce_n == 0 { 0.0 } else { ce_sum / ce_n as f64 },
            skipped,
        })
    }

    /// Collects one trajectory and learns from it.
    pub fn train_episode<R: Rng + ?Sized>(&mut self, env: &mut QoeEnv, rng: &mut R) -> Result<EpisodeStats> {
        let traj = self.collect(env, self.cfg.horizon, rng)?;
        let update = self.update(&traj, rng)?;
        let stats = EpisodeStats {
            episode: self.episodes,
            mean_q: traj.mean_reward(),
            train_acc: traj.accuracy(),
            mean_delay: traj.mean_delay(),
            delay_ok: traj.delay_ok(),
            update,
            step_q: traj.rewards(),
        };
        self.episodes += 1;
        Ok(stats)
    }

    /// Resets `env` and runs the policy mean until the data runs out or
    /// `max_steps` is reached, without learning.
    pub fn evaluate<R: Rng + ?Sized>(&self, env: &mut QoeEnv, max_steps: usize, rng: &mut R) -> Result<EvalStats> {
        let mut obs = env.reset(rng)?;
        let mut traj = Trajectory::default();
        for _ in 0..max_steps {
            let (t, next) = self.run_step(env, obs.features(), true, rng)?;
            traj.steps.push(t);
            match next {
                Some(n) => obs = n,
                None => break,
            }
        }
        Ok(EvalStats {
            steps: traj.len(),
            mean_q: traj.mean_reward(),
            accuracy: traj.accuracy(),
            mean_delay: traj.mean_delay(),
            delay_ok: traj.delay_ok(),
            mean_phi: traj.mean_phi(),
            step_q: traj.rewards(),
        })
    }

    /// Accuracy of the class source on labelled windows, ignoring the channel.
    pub fn accuracy_on(&self, segments: &[bciqoe_eeg::EegSegment]) -> Result<f64> {
        let hits = match &self.source {
            ClassSource::Cnn { net, .. } => {
                let mut hits = 0;
                for chunk in segments.chunks(256) {
                    let probs = net.probs(&net.batch(chunk)?)?;
                    hits += probs.iter().zip(chunk).filter(|(p, s)| argmax(p) == s.label).count();
                }
                hits
            }
            ClassSource::Svm(svm) => segments.iter().filter(|s| svm.predict(&s.window, 0) == s.label).count(),
            ClassSource::Ideal => segments.len(),
            ClassSource::Policy => return Ok(f64::NAN),
        };
        Ok(mean((0..segments.len()).map(|i| if i < hits { 1.0 } else { 0.0 })))
    }

    fn entries(&self) -> Vec<(String, Tensor)> {
        let mut out = self.actor.params.prefixed("actor");
        out.extend(self.critic.params.prefixed("critic"));
        match &self.source {
            ClassSource::Cnn { net, .. } => out.extend(net.params.prefixed("classifier")),
            ClassSource::Svm(svm) => out.push(("svm.weights".into(), Tensor::from_rows(&svm.model.weights))),
            _ => {}
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(path, &self.entries())?;
        Ok(())
    }

    /// Loads weights written by [`Learner::save`] for the same architecture.
    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let entries = checkpoint::load(path)?;
        let group = |prefix: &str| -> Vec<(String, Tensor)> {
            let p = format!("{prefix}.");
            entries
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(&p).map(|s| (s.to_string(), t.clone())))
                .collect()
        };
        fn replace(target: &mut ParamSet, found: Vec<(String, Tensor)>, what: &str) -> Result<()> {
            let found = ParamSet::new(found);
            if found.names() != target.names() || target.max_abs_diff(&found).is_none() {
                return Err(LearnerError::Checkpoint(format!("{what} weights do not match this architecture")));
            }
            *target = found;
            Ok(())
        }
        replace(&mut self.actor.params, group("actor"), "actor")?;
        replace(&mut self.critic.params, group("critic"), "critic")?;
        match &mut self.source {
            ClassSource::Cnn { net, .. } => replace(&mut net.params, group("classifier"), "classifier")?,
            ClassSource::Svm(svm) => {
                let w = group("svm");
                let Some((_, t)) = w.first() else {
                    return Err(LearnerError::Checkpoint("missing svm weights".into()));
                };
                let (c, d) = (svm.model.classes(), svm.model.dim + 1);
                if t.shape() != [c, d] {
                    return Err(LearnerError::Checkpoint("svm weights do not match".into()));
                }
                svm.model.weights = t.data().chunks(d).map(<[f64]>::to_vec).collect();
            }
            _ => {}
        }
        Ok(())
    }
}
