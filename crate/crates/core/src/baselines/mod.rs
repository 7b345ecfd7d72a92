//! BKT with forgetting and DKT over averaged KC embeddings.

mod bkt;
mod dkt;

pub use bkt::{
    bkt_backward, bkt_forward, bkt_observe, bkt_predict, bkt_transition, expand_per_kc, Bkt, BktProbs, BKT_INIT,
};
pub use dkt::{interaction_row, Dkt, DktConfig};

use crate::data::EncodedSequence;
use crate::error::Result;
use crate::train::{fit, TrainConfig, TrainLog};

/// SGD on mean BCE; see [`TrainConfig::sgd`] for the defaults.
pub fn train_bkt(model: &mut Bkt, train: &[EncodedSequence], val: &[EncodedSequence], cfg: &TrainConfig) -> Result<TrainLog> {
    fit(model, train, val, cfg)
}

pub fn train_dkt(model: &mut Dkt, train: &[EncodedSequence], val: &[EncodedSequence], cfg: &TrainConfig) -> Result<TrainLog> {
    fit(model, train, val, cfg)
}
