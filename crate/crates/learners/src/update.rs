use bciqoe_autodiff::{sgd_step, Adam, ParamSet, Tape, Tensor};
use bciqoe_eeg::EegSegment;

use crate::advantage::{clip_bound, discounted_returns, gae, normalize, td_errors};
use crate::config::{CriticTarget, LearnerConfig};
use crate::error::{LearnerError, Result};
use crate::nets::{Actor, Classifier, Critic};
use crate::trajectory::Trajectory;

/// A trajectory flattened into tensors for the policy and value updates.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Tensor,
    pub raw: Tensor,
    /// Chosen classes, row-major `[O, K]`; empty without a categorical head.
    pub classes: Vec<usize>,
    pub old_log_prob: Vec<f64>,
    pub deltas: Vec<f64>,
    pub advantages: Vec<f64>,
    pub critic_targets: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn new(traj: &Trajectory, cfg: &LearnerConfig) -> Result<Self> {
        if traj.is_empty() {
            return Err(LearnerError::InsufficientData {
                user: 0,
                have: 0,
                need: 1,
            });
        }
        let rows: Vec<Vec<f64>> = traj.steps.iter().map(|s| s.features.clone()).collect();
        let raw: Vec<Vec<f64>> = traj.steps.iter().map(|s| s.raw.clone()).collect();
        let rewards = traj.rewards();
        let deltas = td_errors(&rewards, &traj.values(), traj.last_value, cfg.gamma);
        let mut advantages = gae(&deltas, cfg.gamma, cfg.lambda, cfg.gae_mode);
        if cfg.normalize_advantages {
            normalize(&mut advantages);
        }
        let returns = discounted_returns(&rewards, traj.last_value, cfg.gamma);
        let critic_targets = match cfg.critic_target {
            CriticTarget::Reward => rewards,
            CriticTarget::Return => returns.clone(),
        };
        Ok(Self {
            features: Tensor::from_rows(&rows),
            raw: Tensor::from_rows(&raw),
            classes: traj.steps.iter().flat_map(|s| s.classes.iter().copied()).collect(),
            old_log_prob: traj.steps.iter().map(|s| s.log_prob).collect(),
            deltas,
            advantages,
            critic_targets,
            returns,
        })
    }

    pub fn len(&self) -> usize {
        self.old_log_prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_prob.is_empty()
    }

    fn classes_for(&self, idx: &[usize]) -> Vec<usize> {
        if self.classes.is_empty() {
            return vec![];
        }
        let k = self.classes.len() / self.len();
        idx.iter().flat_map(|&i| self.classes[i * k..(i + 1) * k].iter().copied()).collect()
    }
}

fn pick<T: Copy>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i]).collect()
}

/// Clipped surrogate loss `-mean_b min(r_b A_b, f_c(eps, A_b))` over rows
/// `idx`, with `r_b` the density ratio of new to old policy. Returns the
/// loss and gradients, or `None` when some ratio is not finite.
pub fn ppo_actor_grads(
    actor: &Actor,
    params: &ParamSet,
    batch: &Batch,
    idx: &[usize],
    clip: f64,
) -> Result<Option<(f64, Vec<Tensor>)>> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let x = batch.features.gather_rows(idx);
    let a = batch.raw.gather_rows(idx);
    let new_lp = actor.log_prob_on_tape(&mut tape, &vars, &x, &a, &batch.classes_for(idx))?;
    let old = tape.constant(Tensor::from_vec(pick(&batch.old_log_prob, idx)));
    let diff = tape.sub(new_lp, old)?;
    let ratio = tape.exp(diff)?;
    if !tape.value(ratio).is_finite() {
        return Ok(None);
    }
    let adv = pick(&batch.advantages, idx);
    let bound = tape.constant(Tensor::from_vec(adv.iter().map(|&a| clip_bound(clip, a)).collect()));
    let adv = tape.constant(Tensor::from_vec(adv));
    let surrogate = tape.mul(ratio, adv)?;
    let j = tape.minimum(surrogate, bound)?;
    let mean_j = tape.mean(j)?;
    let loss = tape.scale(mean_j, -1.0)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Ok(None);
    }
    let grads = tape.backward(loss)?.for_vars(&vars)?;
    Ok(Some((value, grads)))
}

/// REINFORCE loss `-mean_b log pi(a_b | s_b) * weight_b` over rows `idx`.
pub fn reinforce_grads(
    actor: &Actor,
    params: &ParamSet,
    batch: &Batch,
    idx: &[usize],
    weights: &[f64],
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let x = batch.features.gather_rows(idx);
    let a = batch.raw.gather_rows(idx);
    let lp = actor.log_prob_on_tape(&mut tape, &vars, &x, &a, &batch.classes_for(idx))?;
    let w = tape.constant(Tensor::from_vec(pick(weights, idx)));
    let weighted = tape.mul(lp, w)?;
    let mean = tape.mean(weighted)?;
    let loss = tape.scale(mean, -1.0)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(LearnerError::NonFinite("policy-gradient loss"));
    }
    let grads = tape.backward(loss)?.for_vars(&vars)?;
    Ok((value, grads))
}

/// One Adam step of the clipped objective; `None` means the step was skipped.
pub fn actor_ppo_step(actor: &mut Actor, opt: &mut Adam, batch: &Batch, idx: &[usize], clip: f64) -> Result<Option<f64>> {
    match ppo_actor_grads(actor, &actor.params, batch, idx, clip)? {
        Some((loss, grads)) => {
            opt.step(&mut actor.params, &grads)?;
            Ok(Some(loss))
        }
        None => Ok(None),
    }
}

pub fn critic_step(critic: &mut Critic, opt: &mut Adam, batch: &Batch, idx: &[usize]) -> Result<f64> {
    let x = batch.features.gather_rows(idx);
    let (loss, grads) = critic.loss_and_grads(&critic.params, &x, &pick(&batch.critic_targets, idx))?;
    opt.step(&mut critic.params, &grads)?;
    Ok(loss)
}

/// Labelled windows with their loss weights `1 - eps_star`.
#[derive(Debug, Clone, Default)]
pub struct LabeledBatch<'a> {
    pub segments: Vec<&'a EegSegment>,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

impl<'a> LabeledBatch<'a> {
    /// Every user's window at the given steps.
    pub fn from_steps(traj: &'a Trajectory, idx: &[usize]) -> Self {
        let mut out = Self::default();
        for &i in idx {
            let s = &traj.steps[i];
            for (seg, &label) in s.received.iter().zip(&s.labels) {
                out.segments.push(seg);
                out.labels.push(label);
                out.weights.push(1.0 - s.eps_star);
            }
        }
        out
    }

    /// Windows of user slot `k` only, in step order.
    pub fn for_user(traj: &'a Trajectory, k: usize) -> Self {
        let mut out = Self::default();
        for s in &traj.steps {
            out.segments.push(&s.received[k]);
            out.labels.push(s.labels[k]);
            out.weights.push(1.0 - s.eps_star);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            segments: pick(&self.segments, idx),
            labels: pick(&self.labels, idx),
            weights: pick(&self.weights, idx),
        }
    }
}

/// Gradient of the error-weighted cross-entropy, summed over the batch.
pub fn classifier_grads(cls: &Classifier, params: &ParamSet, data: &LabeledBatch) -> Result<(f64, Vec<Tensor>)> {
    let x = cls.batch(data.segments.iter().copied())?;
    cls.weighted_ce(params, &x, &data.labels, &data.weights)
}

pub fn classifier_step(cls: &mut Classifier, opt: &mut Adam, data: &LabeledBatch) -> Result<f64> {
    let (loss, grads) = classifier_grads(cls, &cls.params, data)?;
    opt.step(&mut cls.params, &grads)?;
    Ok(loss)
}

/// Inner loop of the meta-learner: plain SGD from `start`, one step per
/// mini-batch, in order. Returns the adapted parameters and the mean loss.
pub fn meta_inner(cls: &Classifier, start: &ParamSet, batches: &[LabeledBatch], lr: f64) -> Result<(ParamSet, f64)> {
    let mut params = start.clone();
    let mut total = 0.0;
    for b in batches {
        let (loss, grads) = classifier_grads(cls, &params, b)?;
        sgd_step(&mut params, &grads, lr)?;
        total += loss;
    }
    Ok((params, total / batches.len().max(1) as f64))
}

/// Splits `n` shuffled indices into `w` contiguous mini-batches whose sizes
/// differ by at most one.
pub fn split_minibatches(order: &[usize], w: usize) -> Vec<Vec<usize>> {
    let n = order.len();
    let mut out = Vec::with_capacity(w);
    let mut start = 0;
    for j in 0..w {
        let size = n / w + usize::from(j < n % w);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    out
}

/// Outer update `phi + alpha (1/K) sum_k (phi_k - phi)`, evaluated as
/// `(1 - alpha) phi + alpha mean_k phi_k` so that `K = 1, alpha = 1` lands
/// exactly on the adapted parameters.
pub fn meta_update(start: &ParamSet, adapted: &[ParamSet], alpha: f64) -> Result<ParamSet> {
    if adapted.is_empty() {
        return Ok(start.clone());
    }
    let mut sum = start.zeros_like();
    for a in adapted {
        sum.axpy(1.0, a)?;
    }
    let k = adapted.len() as f64;
    let mut out = start.clone();
    for (o, s) in out.tensors_mut().iter_mut().zip(sum.tensors()) {
        for (x, &t) in o.data_mut().iter_mut().zip(s.data()) {
            *x = (1.0 - alpha) * *x + alpha * (t / k);
        }
    }
    Ok(out)
}
