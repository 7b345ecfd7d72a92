//! AUC, parallel evaluation, reports and the experiment runner.

mod auc;
mod experiment;
mod report;

use std::sync::OnceLock;

use rayon::prelude::*;

pub use auc::{auc, auc_from, ScoredPrediction};
pub use experiment::{
    augment_split, prepare, report_config, run_experiment, run_experiment_on, train_model, ExperimentConfig,
    ExperimentOutcome, ModelKind, Prepared, Stage, StageResult,
};
pub use report::{config_hash, emit_report, EvalReport};

use crate::data::{EncodedSequence, EncodedStep};
use crate::error::{Error, Result};

/// Anything that maps a step sequence to per-step probabilities of a correct answer.
///
/// The prediction for step `t` must not depend on `y_t` or later labels.
pub trait SequencePredictor {
    fn predict(&self, steps: &[EncodedStep]) -> Result<Vec<f64>>;
}

/// Evaluation thread count from `SBRKT_THREADS`, or all cores.
pub fn eval_threads() -> usize {
    std::env::var("SBRKT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(eval_threads())
            .build()
            .expect("evaluation thread pool")
    })
}

/// Pooled predictions and labels over all scored steps, in input order.
pub fn collect_predictions<P>(model: &P, seqs: &[EncodedSequence], max_len: usize) -> Result<(Vec<f64>, Vec<u8>)>
where
    P: SequencePredictor + Sync + ?Sized,
{
    if max_len == 0 {
        return Err(Error::InvalidInput("max_len must be positive".into()));
    }
    let chunks: Vec<&[EncodedStep]> = seqs.iter().flat_map(|s| s.steps.chunks(max_len)).collect();
    let per_chunk: Vec<Result<Vec<(f64, u8)>>> = pool().install(|| {
        chunks
            .par_iter()
            .map(|steps| {
                let p = model.predict(steps)?;
                Ok(p.into_iter()
                    .zip(steps.iter())
                    .filter(|(_, s)| s.scored())
                    .map(|(p, s)| (p, s.y))
                    .collect())
            })
            .collect()
    });
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for chunk in per_chunk {
        for (p, y) in chunk? {
            scores.push(p);
            labels.push(y);
        }
    }
    Ok((scores, labels))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOutcome {
    pub auc: f64,
    pub n: usize,
}

/// Micro-AUC pooled over every scored step of every sequence.
pub fn evaluate_sequences<P>(model: &P, seqs: &[EncodedSequence], max_len: usize) -> Result<EvalOutcome>
where
    P: SequencePredictor + Sync + ?Sized,
{
    let (scores, labels) = collect_predictions(model, seqs, max_len)?;
    if scores.is_empty() {
        return Err(Error::NoValidSteps);
    }
    Ok(EvalOutcome {
        auc: auc_from(&scores, &labels)?,
        n: scores.len(),
    })
}
