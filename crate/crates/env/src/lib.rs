//! Step-based environment for joint uplink/compute allocation and BCI
//! classification. Raw policy outputs are projected onto the feasible
//! allocation set and each step is scored by a delay indicator plus an
//! error-discounted classification indicator.

mod action;
mod env;
mod error;
mod link;

pub use action::{
    argmax, classification_indicator, delay_indicator, largest_remainder, modified_ce_loss, project_action,
    sigmoid, softmax, ResourceAction, LOG_FLOOR,
};
pub use env::{DealOrder, EnvConfig, Observation, QoERecord, QoeEnv, Step, StepLog, UserQoe};
pub use error::{EnvError, Result};
pub use link::{link_outcome, LinkOutcome};
