//! The SBRKT model: exercise codes, quantizer, and the LSTM sequence model.

mod config;
mod model;
pub mod quantizer;

pub use config::{SbrktConfig, Variant};
pub use model::{Sbrkt, SbrktIds, StepOutput};
pub(crate) use model::sequence_batch_loss;
pub use quantizer::{quantize, quantize_backward, quantize_variant, quantizer_stats, top_mask, QuantizerOutput, QuantizerStats};

use crate::data::EncodedSequence;
use crate::error::Result;
use crate::train::{fit, TrainConfig, TrainLog};

/// Adam at the configured rate with validation-AUC early stopping.
pub fn train_sbrkt(
    model: &mut Sbrkt,
    train: &[EncodedSequence],
    val: &[EncodedSequence],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    fit(model, train, val, cfg)
}
