//! Learners for joint resource allocation and EEG classification: the
//! hybrid actor-critic-classifier, its meta-learning variant and the
//! reward-only, VPG and SVM baselines.

pub mod advantage;
pub mod config;
pub mod error;
pub mod learner;
pub mod log;
pub mod nets;
pub mod svm;
pub mod trajectory;
pub mod update;

pub use advantage::{clip_bound, clipped_objective, discounted_returns, gae, normalize, scalar_advantage, td_errors};
pub use config::{CnnConfig, CriticTarget, GaeMode, LearnerConfig, LearnerKind, MetaConfig, SvmConfig};
pub use error::{LearnerError, Result};
pub use learner::{ClassSource, EpisodeStats, EvalStats, Learner, UpdateStats};
pub use log::TrainingLog;
pub use nets::{Actor, ActorSample, Classifier, Critic};
pub use svm::{LinearSvm, SampleStore, SvmClassifier};
pub use trajectory::{Trajectory, Transition};
pub use update::{
    actor_ppo_step, classifier_grads, classifier_step, critic_step, meta_inner, meta_update, ppo_actor_grads,
    reinforce_grads, split_minibatches, Batch, LabeledBatch,
};
