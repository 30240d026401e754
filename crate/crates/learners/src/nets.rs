use bciqoe_autodiff::{softmax_in_place, Layer, ParamSet, Sequential, Tape, Tensor, Var};
use bciqoe_eeg::EegSegment;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::CnnConfig;
use crate::error::{LearnerError, Result};

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

fn widths(inp: usize, hidden: &[usize], out: usize) -> Vec<usize> {
    let mut w = vec![inp];
    w.extend_from_slice(hidden);
    w.push(out);
    w
}

fn named(prefix: &str, params: ParamSet) -> Vec<(String, Tensor)> {
    params.prefixed(prefix)
}

/// Convolutional classifier over `[channels, width]` windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    net: Sequential,
    pub params: ParamSet,
    pub classes: usize,
}

impl Classifier {
    pub fn network(cfg: &CnnConfig, channels: usize, width: usize, classes: usize) -> Result<Sequential> {
        let after2 = (width + 2).checked_sub(2 * cfg.kernel).unwrap_or(0);
        if after2 < cfg.pool {
            return Err(LearnerError::Config(format!(
                "window width {width} too short for two kernels of {} and pool {}",
                cfg.kernel, cfg.pool
            )));
        }
        let flat = cfg.filters2 * (after2 / cfg.pool);
        Ok(Sequential::new(
            vec![channels, width],
            vec![
                Layer::Conv1d {
                    in_ch: channels,
                    out_ch: cfg.filters1,
                    kernel: cfg.kernel,
                    stride: 1,
                },
                Layer::Relu,
                Layer::Conv1d {
                    in_ch: cfg.filters1,
                    out_ch: cfg.filters2,
                    kernel: cfg.kernel,
                    stride: 1,
                },
                Layer::Relu,
                Layer::MaxPool1d { size: cfg.pool },
                Layer::Flatten,
                Layer::Linear { inp: flat, out: classes },
            ],
        )?)
    }

    pub fn new<R: Rng + ?Sized>(
        cfg: &CnnConfig,
        channels: usize,
        width: usize,
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let net = Self::network(cfg, channels, width, classes)?;
        let params = net.init(rng);
        Ok(Self { net, params, classes })
    }

    pub fn input_shape(&self) -> &[usize] {
        self.net.input_shape()
    }

    /// Stacks windows into a `[B, channels, width]` batch.
    pub fn batch<'a>(&self, segments: impl IntoIterator<Item = &'a EegSegment>) -> Result<Tensor> {
        let (c, w) = (self.net.input_shape()[0], self.net.input_shape()[1]);
        let mut data = Vec::new();
        let mut n = 0;
        for s in segments {
            if s.channels != c || s.width != w {
                return Err(LearnerError::Config(format!(
                    "segment is {}x{}, classifier expects {c}x{w}",
                    s.channels, s.width
                )));
            }
            data.extend_from_slice(&s.window);
            n += 1;
        }
        Ok(Tensor::new(vec![n, c, w], data)?)
    }

    pub fn logits(&self, params: &ParamSet, x: &Tensor) -> Result<Tensor> {
        Ok(self.net.eval(params, x)?)
    }

    /// Class distributions, one row per window.
    pub fn probs(&self, x: &Tensor) -> Result<Vec<Vec<f64>>> {
        let logits = self.logits(&self.params, x)?;
        Ok(logits
            .data()
            .chunks(self.classes)
            .map(|row| {
                let mut r = row.to_vec();
                softmax_in_place(&mut r);
                r
            })
            .collect())
    }

    /// `sum_b weight_b * -ln softmax(f(x_b))[label_b]` and its gradient
    /// with respect to `params`.
    pub fn weighted_ce(
        &self,
        params: &ParamSet,
        x: &Tensor,
        labels: &[usize],
        weights: &[f64],
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let input = tape.constant(x.clone());
        let logits = self.net.forward(&mut tape, &vars, input)?;
        let logp = tape.log_softmax(logits)?;
        let picked = tape.pick(logp, labels)?;
        let w = tape.constant(Tensor::from_vec(weights.to_vec()));
        let weighted = tape.mul(picked, w)?;
        let total = tape.sum(weighted)?;
        let loss = tape.scale(total, -1.0)?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(LearnerError::NonFinite("classifier loss"));
        }
        let grads = tape.backward(loss)?.for_vars(&vars)?;
        Ok((value, grads))
    }

    pub fn network_ref(&self) -> &Sequential {
        &self.net
    }
}

/// A sampled action and its log-density under the policy that drew it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorSample {
    /// Unconstrained resource vector of length `3K`.
    pub raw: Vec<f64>,
    /// Chosen classes, only for the reward-only learners.
    pub classes: Vec<usize>,
    pub log_prob: f64,
}

/// Diagonal-Gaussian policy over the unconstrained resource vector, with a
/// state-independent learned log-std. Reward-only learners add a
/// categorical head choosing one class per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    mean_net: Sequential,
    class_net: Option<Sequential>,
    pub params: ParamSet,
    n_mean: usize,
    users: usize,
    classes: usize,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        users: usize,
        hidden: &[usize],
        log_std_init: f64,
        class_head: Option<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let mean_net = Sequential::mlp(&widths(inputs, hidden, 3 * users))?;
        let mean_params = mean_net.init(rng);
        let n_mean = mean_params.len();
        let mut entries = named("mean", mean_params);
        entries.push(("log_std".into(), Tensor::full(&[3 * users], log_std_init)));
        let class_net = match class_head {
            Some(c) => {
                let net = Sequential::mlp(&widths(inputs, hidden, users * c))?;
                entries.extend(named("class", net.init(rng)));
                Some(net)
            }
            None => None,
        };
        Ok(Self {
            mean_net,
            class_net,
            params: ParamSet::new(entries),
            n_mean,
            users,
            classes: class_head.unwrap_or(0),
        })
    }

    pub fn inputs(&self) -> usize {
        self.mean_net.input_shape()[0]
    }

    pub fn action_dim(&self) -> usize {
        3 * self.users
    }

    pub fn has_class_head(&self) -> bool {
        self.class_net.is_some()
    }

    pub fn log_std(&self) -> &[f64] {
        self.params.tensors()[self.n_mean].data()
    }

    fn split<'a>(&self, params: &'a ParamSet) -> (ParamSet, &'a Tensor, Option<ParamSet>) {
        let t = params.tensors();
        let names = params.names();
        let take = |r: std::ops::Range<usize>| {
            ParamSet::new(names[r.clone()].iter().cloned().zip(t[r].iter().cloned()).collect())
        };
        let mean = take(0..self.n_mean);
        let class = self.class_net.as_ref().map(|_| take(self.n_mean + 1..t.len()));
        (mean, &t[self.n_mean], class)
    }

    /// Mean of the Gaussian for one observation.
    pub fn mean(&self, features: &[f64]) -> Result<Vec<f64>> {
        let (mean, _, _) = self.split(&self.params);
        let x = Tensor::new(vec![1, features.len()], features.to_vec())?;
        Ok(self.mean_net.eval(&mean, &x)?.into_data())
    }

    /// Per-user class log-probabilities from the categorical head.
    pub fn class_log_probs(&self, features: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (_, _, class) = self.split(&self.params);
        let (Some(net), Some(class)) = (&self.class_net, class) else {
            return Ok(vec![]);
        };
        let x = Tensor::new(vec![1, features.len()], features.to_vec())?;
        let logits = net.eval(&class, &x)?.into_data();
        Ok(logits
            .chunks(self.classes)
            .map(|row| {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                row.iter().map(|v| v - lse).collect()
            })
            .collect())
    }

    /// Draws an action, or takes the mode when `deterministic`.
    pub fn act<R: Rng + ?Sized>(&self, features: &[f64], deterministic: bool, rng: &mut R) -> Result<ActorSample> {
        let mean = self.mean(features)?;
        let log_std = self.log_std();
        let raw: Vec<f64> = if deterministic {
            mean.clone()
        } else {
            mean.iter()
                .zip(log_std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s.exp() * z
                })
                .collect()
        };
        let class_logp = self.class_log_probs(features)?;
        let classes: Vec<usize> = class_logp
            .iter()
            .map(|row| {
                if deterministic {
                    bciqoe_env::argmax(row)
                } else {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = row.len() - 1;
                    for (c, lp) in row.iter().enumerate() {
                        acc += lp.exp();
                        if u < acc {
                            pick = c;
                            break;
                        }
                    }
                    pick
                }
            })
            .collect();
        let log_prob = self.log_prob(features, &raw, &classes)?;
        Ok(ActorSample { raw, classes, log_prob })
    }

    /// Log-density of `(raw, classes)` given `features`.
    pub fn log_prob(&self, features: &[f64], raw: &[f64], classes: &[usize]) -> Result<f64> {
        let mean = self.mean(features)?;
        let mut lp: f64 = 0.0;
        for ((a, m), s) in raw.iter().zip(&mean).zip(self.log_std()) {
            let z = (a - m) * (-s).exp();
            lp += -0.5 * z * z - s - HALF_LOG_2PI;
        }
        let class_logp = self.class_log_probs(features)?;
        for (row, &c) in class_logp.iter().zip(classes) {
            lp += row[c];
        }
        Ok(lp)
    }

    /// Records per-row log-densities `[B]` of a batch on `tape`.
    pub fn log_prob_on_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        features: &Tensor,
        raw: &Tensor,
        classes: &[usize],
    ) -> Result<Var> {
        let batch = features.shape()[0];
        let x = tape.constant(features.clone());
        let mean = self.mean_net.forward(tape, &vars[..self.n_mean], x)?;
        let mut lp = tape.gaussian_log_prob(mean, vars[self.n_mean], raw)?;
        if let Some(net) = &self.class_net {
            let logits = net.forward(tape, &vars[self.n_mean + 1..], x)?;
            let rows = tape.reshape(logits, vec![batch * self.users, self.classes])?;
            let logp = tape.log_softmax(rows)?;
            let picked = tape.pick(logp, classes)?;
            let per_row = tape.reshape(picked, vec![batch, self.users])?;
            let ones = tape.constant(Tensor::full(&[self.users, 1], 1.0));
            let zero = tape.constant(Tensor::zeros(&[1]));
            let summed = tape.linear(per_row, ones, zero)?;
            let summed = tape.reshape(summed, vec![batch])?;
            lp = tape.add(lp, summed)?;
        }
        Ok(lp)
    }
}

/// State-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    net: Sequential,
    pub params: ParamSet,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let net = Sequential::mlp(&widths(inputs, hidden, 1))?;
        let params = net.init(rng);
        Ok(Self { net, params })
    }

    pub fn value(&self, features: &[f64]) -> Result<f64> {
        let x = Tensor::new(vec![1, features.len()], features.to_vec())?;
        Ok(self.net.eval(&self.params, &x)?.data()[0])
    }

    /// `mean_b (V(x_b) - target_b)^2` and its gradient.
    pub fn loss_and_grads(&self, params: &ParamSet, x: &Tensor, targets: &[f64]) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let input = tape.constant(x.clone());
        let v = self.net.forward(&mut tape, &vars, input)?;
        let v = tape.reshape(v, vec![targets.len()])?;
        let t = tape.constant(Tensor::from_vec(targets.to_vec()));
        let diff = tape.sub(v, t)?;
        let sq = tape.square(diff)?;
        let loss = tape.mean(sq)?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(LearnerError::NonFinite("critic loss"));
        }
        let grads = tape.backward(loss)?.for_vars(&vars)?;
        Ok((value, grads))
    }
}
