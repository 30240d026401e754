//! Minimal dense-tensor reverse-mode differentiation.
//!
//! Networks are described by [`Sequential`] stacks of [`Layer`]s, evaluated on
//! a [`Tape`] that records every primitive, then differentiated with
//! [`Tape::backward`]. Parameters live in [`ParamSet`]s and are updated by
//! [`Adam`] or [`sgd_step`].

pub mod checkpoint;
mod error;
pub mod fd;
mod layers;
mod optim;
mod tape;
mod tensor;

pub use error::{AutodiffError, Result};
pub use layers::{Layer, ParamSet, Sequential};
pub use optim::{sgd_step, Adam, AdamConfig};
pub use tape::{softmax_in_place, Gradients, Tape, Var};
pub use tensor::Tensor;
