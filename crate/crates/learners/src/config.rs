use serde::{Deserialize, Serialize};

use crate::error::{LearnerError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    #[default]
    Hybrid,
    Meta,
    Vpg,
    PpoRewardOnly,
    Svm,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::Hybrid,
        LearnerKind::Meta,
        LearnerKind::Vpg,
        LearnerKind::PpoRewardOnly,
        LearnerKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Hybrid => "hybrid",
            LearnerKind::Meta => "meta",
            LearnerKind::Vpg => "vpg",
            LearnerKind::PpoRewardOnly => "ppo-reward-only",
            LearnerKind::Svm => "svm",
        }
    }

    /// Learners that pick classes from the reward alone, without a classifier.
    pub fn reward_only(self) -> bool {
        matches!(self, LearnerKind::Vpg | LearnerKind::PpoRewardOnly)
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LearnerError::Config(format!("unknown learner {s:?}")))
    }
}

/// Exponent convention of the advantage sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GaeMode {
    /// Weights `(gamma lambda)^(j - o + 1)`: the first TD error is already discounted.
    #[default]
    Printed,
    /// Weights `(gamma lambda)^(j - o)`.
    Standard,
}

/// Regression target of the critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CriticTarget {
    /// The step's mean QoE.
    #[default]
    Reward,
    /// Discounted return-to-go, bootstrapped at the horizon.
    Return,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub filters1: usize,
    pub filters2: usize,
    pub kernel: usize,
    pub pool: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filters1: 32,
            filters2: 32,
            kernel: 3,
            pool: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    /// Inner SGD steps, one per mini-batch of a user's data.
    pub w: usize,
    pub inner_lr: f64,
    pub alpha_m: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            w: 3,
            inner_lr: 2e-3,
            alpha_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub lr: f64,
    /// L2 penalty.
    pub lambda: f64,
    /// Hinge-loss SGD updates per refit.
    pub steps: usize,
    /// Largest number of stored samples; reservoir sampling beyond it.
    pub capacity: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            lambda: 1e-4,
            steps: 3000,
            capacity: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Hidden widths of the actor and critic.
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub classifier_lr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    /// Steps per trajectory.
    #[serde(rename = "O")]
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub normalize_advantages: bool,
    pub gae_mode: GaeMode,
    pub critic_target: CriticTarget,
    pub log_std_init: f64,
    pub cnn: CnnConfig,
    pub meta: MetaConfig,
    pub svm: SvmConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Hybrid,
            hidden: vec![64, 64],
            actor_lr: 5e-5,
            critic_lr: 5e-4,
            classifier_lr: 2e-3,
            gamma: 0.99,
            lambda: 0.99,
            clip: 0.2,
            horizon: 100,
            epochs: 4,
            minibatch: 25,
            normalize_advantages: true,
            gae_mode: GaeMode::Printed,
            critic_target: CriticTarget::Reward,
            log_std_init: -0.5,
            cnn: CnnConfig::default(),
            meta: MetaConfig::default(),
            svm: SvmConfig::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(LearnerError::Config(s));
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("classifier_lr", self.classifier_lr),
            ("meta.inner_lr", self.meta.inner_lr),
            ("meta.alpha_m", self.meta.alpha_m),
            ("svm.lr", self.svm.lr),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad(format!("clip = {} outside (0, 1)", self.clip));
        }
        if !(self.svm.lambda >= 0.0 && self.svm.lambda.is_finite()) {
            return bad("svm.lambda must be non-negative".into());
        }
        if !self.log_std_init.is_finite() {
            return bad("log_std_init must be finite".into());
        }
        let zero = [
            ("O", self.horizon),
            ("epochs", self.epochs),
            ("minibatch", self.minibatch),
            ("meta.w", self.meta.w),
            ("cnn.filters1", self.cnn.filters1),
            ("cnn.filters2", self.cnn.filters2),
            ("cnn.kernel", self.cnn.kernel),
            ("cnn.pool", self.cnn.pool),
            ("svm.capacity", self.svm.capacity),
        ];
        if let Some((name, _)) = zero.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }
}
