//! Minimal reverse-mode differentiation kernel: tensors, a tape graph with the
//! operations the models here need, an LSTM parameter bundle, Adam, and a
//! finite-difference gradient checker.

mod adam;
mod gradcheck;
mod graph;
mod lstm;
mod params;
mod tensor;

pub use adam::Adam;
pub use gradcheck::{grad_check, rel_err, EntryCheck, GradCheckReport, REL_ERR_FLOOR};
pub use graph::{sigmoid, CustomOp, Graph, Var, PROB_CLAMP};
pub use lstm::{LstmParams, LstmVars};
pub use params::{Grads, ParamId, ParamSet};
pub use tensor::Tensor;

/// Default global-norm bound applied to gradients before each optimizer step.
pub const CLIP_NORM: f64 = 5.0;
