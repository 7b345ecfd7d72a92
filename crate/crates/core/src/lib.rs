//! Knowledge tracing with learned sparse binary exercise codes.
//!
//! [`sbrkt`] learns per-question auxiliary KCs, [`auxpipe`] exports them and
//! augments datasets, and [`baselines`] holds BKT and DKT for comparison.

pub mod auxpipe;
pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod sbrkt;
pub mod synth;
pub mod train;

pub use checkpoint::{Checkpoint, TrainedModel};
pub use error::{Error, Result};
pub use eval::{EvalReport, ModelKind};
pub use sbrkt::{Sbrkt, SbrktConfig, Variant};
