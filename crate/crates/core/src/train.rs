//! Epoch loop shared by every gradient-trained model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{batch_windows, window_sequences, Batch, EncodedSequence, DEFAULT_MAX_LEN};
use crate::diff::{Adam, Grads, ParamSet, CLIP_NORM};
use crate::error::{Error, Result};
use crate::eval::{evaluate_sequences, SequencePredictor};

/// A model whose parameters live in one [`ParamSet`] and whose batch objective is differentiable.
pub trait GradModel: SequencePredictor + Sync {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    /// Mean loss over the batch's scored steps and its gradient.
    fn batch_loss(&self, batch: &Batch) -> Result<(f64, Grads)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_len: usize,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn adam(seed: u64) -> Self {
        TrainConfig {
            optimizer: Optimizer::Adam,
            lr: 1e-3,
            batch_size: 128,
            max_epochs: 200,
            patience: 10,
            max_len: DEFAULT_MAX_LEN,
            clip_norm: Some(CLIP_NORM),
            seed,
        }
    }

    pub fn sgd(seed: u64) -> Self {
        TrainConfig {
            optimizer: Optimizer::Sgd,
            lr: 0.01,
            clip_norm: None,
            ..TrainConfig::adam(seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept, if validation ever produced an AUC.
    pub best_epoch: Option<usize>,
    pub best_val_auc: Option<f64>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    /// `epoch,train_loss,val_auc` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_auc\n");
        for e in &self.epochs {
            let auc = e.val_auc.map(|a| format!("{a:?}")).unwrap_or_default();
            out.push_str(&format!("{},{:?},{}\n", e.epoch, e.train_loss, auc));
        }
        out
    }
}

/// Train `model` in place. Parameters end at the best-validation snapshot; with
/// no usable validation AUC they end at the last epoch.
pub fn fit<M: GradModel>(
    model: &mut M,
    train: &[EncodedSequence],
    val: &[EncodedSequence],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    fit_with(model, train, val, cfg, |_, _| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with<M, F>(
    model: &mut M,
    train: &[EncodedSequence],
    val: &[EncodedSequence],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainLog>
where
    M: GradModel,
    F: FnMut(&M, &EpochLog),
{
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be positive".into()));
    }
    let mut windows = window_sequences(train, cfg.max_len)?;
    if windows.is_empty() {
        return Err(Error::InvalidInput("no training windows of length >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.params(), cfg.lr);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ParamSet)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        windows.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut total_steps = 0usize;
        for batch in batch_windows(&windows, cfg.batch_size) {
            let scored = batch.scored_steps();
            if scored == 0 {
                continue;
            }
            let (loss, mut grads) = model.batch_loss(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            if let Some(max) = cfg.clip_norm {
                grads.clip_global_norm(max);
            }
            match cfg.optimizer {
                Optimizer::Adam => adam.step(model.params_mut(), &grads)?,
                Optimizer::Sgd => sgd_step(model.params_mut(), &grads, cfg.lr)?,
            }
            total_loss += loss * scored as f64;
            total_steps += scored;
        }
        if total_steps == 0 {
            return Err(Error::NoValidSteps);
        }
        let train_loss = total_loss / total_steps as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged(epoch));
        }

        let val_auc = if val.is_empty() {
            None
        } else {
            match evaluate_sequences(&*model, val, cfg.max_len) {
                Ok(r) => Some(r.auc),
                Err(Error::AucUndefined | Error::NoValidSteps) => None,
                Err(e) => return Err(e),
            }
        };
        let entry = EpochLog {
            epoch,
            train_loss,
            val_auc,
        };
        log::debug!("epoch {epoch}: loss {train_loss:.6} val_auc {val_auc:?}");
        on_epoch(model, &entry);
        log.epochs.push(entry);

        if let Some(auc) = val_auc {
            if best.as_ref().is_none_or(|(b, _)| auc > *b) {
                best = Some((auc, model.params().clone()));
                log.best_epoch = Some(epoch);
                log.best_val_auc = Some(auc);
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok(log)
}

/// Plain gradient descent. Rejects non-finite gradients before touching anything.
pub fn sgd_step(params: &mut ParamSet, grads: &Grads, lr: f64) -> Result<()> {
    for id in params.ids() {
        if !grads.get(id).all_finite() {
            return Err(Error::NonFiniteGradient(params.name(id).to_string()));
        }
    }
    for id in params.ids().collect::<Vec<_>>() {
        params.get_mut(id).add_scaled(grads.get(id), -lr);
    }
    Ok(())
}
