use std::io::Write;

use bciqoe_eeg::{corrupt, CorruptedSegment, CorruptionMode, EegSegment};
use bciqoe_wireless::{
    sample_channel, ChannelState, CpuLoadState, CpuProcess, CpuTrace, CpuWalk, Delay, NetworkParams,
};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{argmax, ResourceAction};
use crate::error::{EnvError, Result};
use crate::link::{link_outcome, LinkOutcome};

/// Order in which each user's segments are dealt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DealOrder {
    /// Reshuffled at reset and on every wrap-around.
    #[default]
    Shuffled,
    /// Pool order, e.g. for evaluation over a fixed test set.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    #[serde(rename = "K")]
    pub users: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub corruption: CorruptionMode,
    /// Freeze the channel at these gains instead of drawing each step.
    pub fixed_h: Option<Vec<f64>>,
    pub cpu: CpuWalk,
    /// Initial load of every CPU for the random walk.
    pub cpu_start: f64,
    /// How many of the least loaded CPUs the agent observes.
    pub top_cpus: usize,
    /// Wrap around a user's segment pool instead of stopping.
    pub replay: bool,
    pub order: DealOrder,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            users: 3,
            eta1: 1.0,
            eta2: 1.0,
            corruption: CorruptionMode::Analytical,
            fixed_h: None,
            cpu: CpuWalk::default(),
            cpu_start: 0.5,
            top_cpus: 3,
            replay: true,
            order: DealOrder::Shuffled,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(EnvError::Config(s));
        if self.users == 0 {
            return bad("K must be at least 1".into());
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if let Some(h) = &self.fixed_h {
            if h.len() != self.users || h.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return bad(format!("fixed_h needs {} non-negative gains", self.users));
            }
        }
        if self.top_cpus == 0 {
            return bad("top_cpus must be at least 1".into());
        }
        Ok(())
    }
}

/// What the agent sees before acting.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub h: ChannelState,
    /// Loads of the least loaded CPUs, ascending.
    pub u_top: Vec<f64>,
    /// Indices of the CPUs in `u_top`.
    pub cpu_idx: Vec<usize>,
    /// The segment each user is about to send, as captured.
    pub segments: Vec<EegSegment>,
}

impl Observation {
    /// `h` followed by `u_top`, the resource part of the state.
    pub fn features(&self) -> Vec<f64> {
        self.h.h.iter().chain(&self.u_top).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserQoe {
    pub delay: Delay,
    pub psi: f64,
    pub phi: f64,
    pub eps: f64,
    pub q: f64,
    pub label: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoERecord {
    pub t: usize,
    pub users: Vec<UserQoe>,
    pub eps_star: f64,
    pub mean_q: f64,
    pub eta1: f64,
    pub eta2: f64,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub record: QoERecord,
    pub link: LinkOutcome,
    /// Segments as they arrived at the server.
    pub received: Vec<CorruptedSegment>,
    /// `None` once some user's pool ran out with replay disabled.
    pub next: Option<Observation>,
}

/// Multi-user uplink/edge/downlink environment with a per-step QoE reward.
#[derive(Debug, Clone)]
pub struct QoeEnv {
    cfg: EnvConfig,
    net: NetworkParams,
    fading_scale: f64,
    classes: usize,
    pools: Vec<Vec<EegSegment>>,
    cursor: Vec<usize>,
    trace: Option<CpuTrace>,
    cpu: CpuProcess,
    h: ChannelState,
    t: usize,
    exhausted: Option<usize>,
}

impl QoeEnv {
    /// `pools[k]` holds the segments user `k` transmits; labels must be
    /// below `classes`.
    pub fn new(
        cfg: EnvConfig,
        net: NetworkParams,
        fading_scale: f64,
        pools: Vec<Vec<EegSegment>>,
        classes: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        net.validate()?;
        if !(fading_scale.is_finite() && fading_scale > 0.0) {
            return Err(EnvError::Config(format!("fading scale {fading_scale} must be positive")));
        }
        if pools.len() != cfg.users {
            return Err(EnvError::Config(format!("{} segment pools for K = {}", pools.len(), cfg.users)));
        }
        if let Some(k) = pools.iter().position(|p| p.is_empty()) {
            return Err(EnvError::Exhausted(k));
        }
        if let Some(s) = pools.iter().flatten().find(|s| s.label >= classes) {
            return Err(EnvError::Config(format!("segment label {} with {classes} classes", s.label)));
        }
        let cpu = CpuProcess::walk(cfg.cpu, CpuLoadState::uniform(net.n_cpus, cfg.cpu_start))?;
        let h = ChannelState {
            h: cfg.fixed_h.clone().unwrap_or_else(|| vec![fading_scale; cfg.users]),
        };
        Ok(Self {
            cursor: vec![0; cfg.users],
            cfg,
            net,
            fading_scale,
            classes,
            pools,
            trace: None,
            cpu,
            h,
            t: 0,
            exhausted: None,
        })
    }

    /// Replays CPU loads from `trace` instead of the random walk.
    pub fn with_cpu_trace(mut self, trace: CpuTrace) -> Result<Self> {
        if trace.n_cpus() != self.net.n_cpus {
            return Err(EnvError::Config(format!(
                "trace has {} CPUs, network has {}",
                trace.n_cpus(),
                self.net.n_cpus
            )));
        }
        self.cpu = CpuProcess::trace(trace.clone());
        self.trace = Some(trace);
        Ok(self)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn net(&self) -> &NetworkParams {
        &self.net
    }

    pub fn users(&self) -> usize {
        self.cfg.users
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn channel(&self) -> &ChannelState {
        &self.h
    }

    pub fn pools(&self) -> &[Vec<EegSegment>] {
        &self.pools
    }

    /// Length of the observation's resource features.
    pub fn feature_len(&self) -> usize {
        self.cfg.users + self.cfg.top_cpus.min(self.net.n_cpus)
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Observation> {
        self.t = 0;
        self.exhausted = None;
        self.cursor.iter_mut().for_each(|c| *c = 0);
        if self.cfg.order == DealOrder::Shuffled {
            for pool in &mut self.pools {
                pool.shuffle(rng);
            }
        }
        self.cpu = match &self.trace {
            Some(trace) => CpuProcess::trace(trace.clone()),
            None => CpuProcess::walk(self.cfg.cpu, CpuLoadState::uniform(self.net.n_cpus, self.cfg.cpu_start))?,
        };
        self.draw_channel(rng)?;
        Ok(self.observation())
    }

    fn draw_channel<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.cfg.fixed_h.is_none() {
            self.h = sample_channel(rng, self.cfg.users, self.fading_scale)?;
        }
        Ok(())
    }

    /// Least loaded CPUs, ascending by load, ties by index.
    fn top_cpus(&self) -> (Vec<usize>, Vec<f64>) {
        let u = self.cpu.current().u;
        let mut idx: Vec<usize> = (0..u.len()).collect();
        idx.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
        idx.truncate(self.cfg.top_cpus.min(u.len()));
        let loads = idx.iter().map(|&i| u[i]).collect();
        (idx, loads)
    }

    pub fn observation(&self) -> Observation {
        let (cpu_idx, u_top) = self.top_cpus();
        Observation {
            h: self.h.clone(),
            u_top,
            cpu_idx,
            segments: self.pools.iter().zip(&self.cursor).map(|(p, &c)| p[c].clone()).collect(),
        }
    }

    /// Load of the CPU that serves every user this step.
    pub fn serving_load(&self) -> f64 {
        self.top_cpus().1[0]
    }

    /// Network outcome of `action` in the current state, without side effects.
    pub fn evaluate_link(&self, action: &ResourceAction) -> Result<LinkOutcome> {
        action.validate(self.net.m, self.net.p_max)?;
        link_outcome(&self.net, &self.h.h, self.serving_load(), action)
    }

    /// Steps with the class distributions already in `action.phi_out`.
    pub fn step<R: Rng + ?Sized>(&mut self, action: &ResourceAction, rng: &mut R) -> Result<Step> {
        let probs = action.phi_out.clone();
        self.step_with(action, |_| probs, rng)
    }

    /// Transmits, lets `classify` label what arrived, scores the step and
    /// advances channel, CPU load and segment cursors. `action.phi_out` is
    /// ignored in favour of the classifier's output.
    pub fn step_with<R, F>(&mut self, action: &ResourceAction, classify: F, rng: &mut R) -> Result<Step>
    where
        R: Rng + ?Sized,
        F: FnOnce(&[CorruptedSegment]) -> Vec<Vec<f64>>,
    {
        if let Some(k) = self.exhausted {
            return Err(EnvError::Exhausted(k));
        }
        let link = self.evaluate_link(action)?;
        let current = self.observation().segments;
        let received = current
            .iter()
            .map(|s| corrupt(s, link.eps_star, self.cfg.corruption, rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let probs = classify(&received);
        if probs.len() != self.cfg.users || probs.iter().any(|row| row.len() != self.classes) {
            return Err(EnvError::Action(format!(
                "classifier must return {} rows of {} probabilities",
                self.cfg.users, self.classes
            )));
        }
        let record = self.score(&link, &received, &probs);
        self.advance(rng)?;
        let next = if self.exhausted.is_some() {
            None
        } else {
            Some(self.observation())
        };
        Ok(Step {
            record,
            link,
            received,
            next,
        })
    }

    fn score(&self, link: &LinkOutcome, received: &[CorruptedSegment], probs: &[Vec<f64>]) -> QoERecord {
        let (eta1, eta2) = (self.cfg.eta1, self.cfg.eta2);
        let users: Vec<UserQoe> = (0..self.cfg.users)
            .map(|k| {
                let label = received[k].segment.label;
                let predicted = argmax(&probs[k]);
                let correct = if predicted == label { 1.0 } else { 0.0 };
                let phi = match self.cfg.corruption {
                    CorruptionMode::Analytical => (1.0 - link.eps_star) * correct,
                    CorruptionMode::SampleDrop if received[k].dropped => 0.0,
                    CorruptionMode::SampleDrop => correct,
                };
                let psi = link.psi[k];
                UserQoe {
                    delay: link.delay[k],
                    psi,
                    phi,
                    eps: link.eps[k],
                    q: eta1 * psi + eta2 * phi,
                    label,
                    predicted,
                }
            })
            .collect();
        let mean_q = users.iter().map(|u| u.q).sum::<f64>() / users.len() as f64;
        QoERecord {
            t: self.t,
            users,
            eps_star: link.eps_star,
            mean_q,
            eta1,
            eta2,
        }
    }

    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.t += 1;
        self.draw_channel(rng)?;
        self.cpu.advance(rng);
        for k in 0..self.cfg.users {
            self.cursor[k] += 1;
            if self.cursor[k] < self.pools[k].len() {
                continue;
            }
            if !self.cfg.replay {
                self.exhausted.get_or_insert(k);
                continue;
            }
            self.cursor[k] = 0;
            if self.cfg.order == DealOrder::Shuffled {
                self.pools[k].shuffle(rng);
            }
        }
        Ok(())
    }
}

/// Per-step, per-user metric log.
pub struct StepLog<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> StepLog<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "k", "D_k", "psi", "phi", "eps_k", "Q_k", "mean_Q"])?;
        Ok(Self { out })
    }

    pub fn write(&mut self, rec: &QoERecord) -> Result<()> {
        for (k, u) in rec.users.iter().enumerate() {
            let d = match u.delay.seconds() {
                Some(s) => s.to_string(),
                None => "inf".into(),
            };
            self.out.write_record([
                rec.t.to_string(),
                k.to_string(),
                d,
                u.psi.to_string(),
                u.phi.to_string(),
                u.eps.to_string(),
                u.q.to_string(),
                rec.mean_q.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
