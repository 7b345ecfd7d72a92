//! Bayesian Knowledge Tracing with forgetting, trained by gradient descent on
//! sigmoid-parametrized probabilities.

use std::fmt::Write as _;

use crate::data::{Batch, EncodedStep, Vocab};
use crate::diff::{sigmoid, Grads, ParamId, ParamSet, Tensor, PROB_CLAMP};
use crate::error::{Error, Result};
use crate::eval::SequencePredictor;
use crate::train::GradModel;

const DEN_FLOOR: f64 = 1e-12;

/// Initial `(L0, T, G, S, F)`.
pub const BKT_INIT: [f64; 5] = [0.4, 0.2, 0.2, 0.1, 0.05];

/// The five BKT probabilities for one KC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BktProbs {
    pub l0: f64,
    pub t: f64,
    pub g: f64,
    pub s: f64,
    pub f: f64,
}

impl BktProbs {
    pub fn from_array(p: [f64; 5]) -> Self {
        BktProbs {
            l0: p[0],
            t: p[1],
            g: p[2],
            s: p[3],
            f: p[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.l0, self.t, self.g, self.s, self.f]
    }

    pub fn from_logits(l: &[f64]) -> Self {
        BktProbs::from_array([sigmoid(l[0]), sigmoid(l[1]), sigmoid(l[2]), sigmoid(l[3]), sigmoid(l[4])])
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn bkt_predict(p_l: f64, p: &BktProbs) -> f64 {
    p_l * (1.0 - p.s) + (1.0 - p_l) * p.g
}

/// Posterior mastery after observing `y`.
pub fn bkt_observe(p_l: f64, y: u8, p: &BktProbs) -> f64 {
    let (num, den) = if y == 1 {
        let num = p_l * (1.0 - p.s);
        (num, num + (1.0 - p_l) * p.g)
    } else {
        let num = p_l * p.s;
        (num, num + (1.0 - p_l) * (1.0 - p.g))
    };
    num / den.max(DEN_FLOOR)
}

pub fn bkt_transition(p_l: f64, p: &BktProbs) -> f64 {
    p_l * (1.0 - p.f) + (1.0 - p_l) * p.t
}

/// Per-step correctness probabilities for one KC's observation stream.
pub fn bkt_forward(obs: &[u8], p: &BktProbs) -> Vec<f64> {
    let mut p_l = p.l0;
    obs.iter()
        .map(|&y| {
            let pred = bkt_predict(p_l, p);
            p_l = bkt_transition(bkt_observe(p_l, y, p), p);
            pred
        })
        .collect()
}

/// Reverse pass through [`bkt_forward`]: given `∂L/∂p_t`, returns `∂L/∂(L0,T,G,S,F)`.
pub fn bkt_backward(obs: &[u8], p: &BktProbs, grad_pred: &[f64]) -> [f64; 5] {
    let mut priors = Vec::with_capacity(obs.len());
    let mut p_l = p.l0;
    for &y in obs {
        priors.push(p_l);
        p_l = bkt_transition(bkt_observe(p_l, y, p), p);
    }

    let (mut d_t, mut d_g, mut d_s, mut d_f) = (0.0, 0.0, 0.0, 0.0);
    let mut d_next = 0.0;
    for i in (0..obs.len()).rev() {
        let a = priors[i];
        let y = obs[i];
        let post = bkt_observe(a, y, p);
        // transition
        let d_post = d_next * (1.0 - p.f - p.t);
        d_f -= d_next * post;
        d_t += d_next * (1.0 - post);
        // observe
        let mut d_a = 0.0;
        let (num, den) = if y == 1 {
            let num = a * (1.0 - p.s);
            (num, num + (1.0 - a) * p.g)
        } else {
            let num = a * p.s;
            (num, num + (1.0 - a) * (1.0 - p.g))
        };
        let clamped = den < DEN_FLOOR;
        let den_c = den.max(DEN_FLOOR);
        let d_num = d_post / den_c;
        let d_den = if clamped { 0.0 } else { -d_post * num / (den_c * den_c) };
        if y == 1 {
            d_a += d_num * (1.0 - p.s) + d_den * (1.0 - p.s - p.g);
            d_s -= (d_num + d_den) * a;
            d_g += d_den * (1.0 - a);
        } else {
            d_a += d_num * p.s + d_den * (p.s - 1.0 + p.g);
            d_s += (d_num + d_den) * a;
            d_g -= d_den * (1.0 - a);
        }
        // predict
        let gp = grad_pred[i];
        d_a += gp * (1.0 - p.s - p.g);
        d_s -= gp * a;
        d_g += gp * (1.0 - a);
        d_next = d_a;
    }
    [d_next, d_t, d_g, d_s, d_f]
}

/// KC index, its `(step index, y)` stream and the stream's predictions.
type KcStream = (usize, Vec<(usize, u8)>, Vec<f64>);

/// Split a step sequence into per-KC streams of `(step index, y)`, in temporal order.
pub fn expand_per_kc(steps: &[EncodedStep]) -> Vec<(usize, Vec<(usize, u8)>)> {
    let mut streams: std::collections::BTreeMap<usize, Vec<(usize, u8)>> = Default::default();
    for (t, s) in steps.iter().enumerate() {
        for &k in s.kcs.active() {
            streams.entry(k).or_default().push((t, s.y));
        }
    }
    streams.into_iter().collect()
}

/// Per-KC BKT. Parameters are a `[N, 5]` logit table in `(L0, T, G, S, F)` column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Bkt {
    pub params: ParamSet,
    pub logits: ParamId,
    n_kcs: usize,
}

impl Bkt {
    pub fn new(n_kcs: usize) -> Result<Self> {
        Bkt::with_init(n_kcs, BktProbs::from_array(BKT_INIT))
    }

    pub fn with_init(n_kcs: usize, init: BktProbs) -> Result<Self> {
        if n_kcs == 0 {
            return Err(Error::InvalidInput("BKT needs at least one KC".into()));
        }
        let row = init.to_array().map(logit);
        let data = (0..n_kcs).flat_map(|_| row).collect();
        let mut params = ParamSet::new();
        let logits = params.push("bkt.logits", Tensor::matrix(n_kcs, 5, data)?);
        Ok(Bkt { params, logits, n_kcs })
    }

    pub fn from_params(params: ParamSet) -> Result<Self> {
        let logits = params
            .find("bkt.logits")
            .ok_or_else(|| Error::Checkpoint("missing parameter `bkt.logits`".into()))?;
        let shape = params.get(logits).shape().to_vec();
        if shape.len() != 2 || shape[1] != 5 || params.len() != 1 {
            return Err(Error::Checkpoint(format!("bkt.logits has shape {shape:?}, expected [N, 5]")));
        }
        Ok(Bkt {
            n_kcs: shape[0],
            params,
            logits,
        })
    }

    pub fn n_kcs(&self) -> usize {
        self.n_kcs
    }

    pub fn probs(&self, k: usize) -> BktProbs {
        BktProbs::from_logits(self.params.get(self.logits).row(k))
    }

    fn check(&self, steps: &[EncodedStep]) -> Result<()> {
        for s in steps {
            if s.kcs.len() != self.n_kcs {
                return Err(Error::Dimension {
                    lhs: vec![s.kcs.len()],
                    rhs: vec![self.n_kcs],
                    context: "BKT step KC multi-hot",
                });
            }
        }
        Ok(())
    }

    /// Question-level predictions (mean over the step's KCs) and the per-stream
    /// predictions they came from. Steps without KCs get 0.5.
    fn forward_streams(&self, steps: &[EncodedStep]) -> Result<(Vec<f64>, Vec<KcStream>)> {
        self.check(steps)?;
        let mut sums = vec![0.0; steps.len()];
        let streams: Vec<_> = expand_per_kc(steps)
            .into_iter()
            .map(|(k, obs)| {
                let ys: Vec<u8> = obs.iter().map(|o| o.1).collect();
                let preds = bkt_forward(&ys, &self.probs(k));
                for ((t, _), p) in obs.iter().zip(&preds) {
                    sums[*t] += p;
                }
                (k, obs, preds)
            })
            .collect();
        let out = steps
            .iter()
            .zip(sums)
            .map(|(s, sum)| match s.kcs.popcount() {
                0 => 0.5,
                n => sum / n as f64,
            })
            .collect();
        Ok((out, streams))
    }

    /// `kc_id,L0,T,G,S,F` with six decimals.
    pub fn export_csv(&self, vocab: &Vocab) -> Result<String> {
        if vocab.num_kcs() != self.n_kcs {
            return Err(Error::VocabMismatch(format!(
                "vocabulary has {} KCs, model has {}",
                vocab.num_kcs(),
                self.n_kcs
            )));
        }
        let mut out = String::from("kc_id,L0,T,G,S,F\n");
        for (k, id) in vocab.kcs().iter().enumerate() {
            let p = self.probs(k).to_array();
            let _ = writeln!(out, "{id},{:.6},{:.6},{:.6},{:.6},{:.6}", p[0], p[1], p[2], p[3], p[4]);
        }
        Ok(out)
    }
}

impl SequencePredictor for Bkt {
    fn predict(&self, steps: &[EncodedStep]) -> Result<Vec<f64>> {
        Ok(self.forward_streams(steps)?.0)
    }
}

impl GradModel for Bkt {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Returns the mean BCE per scored step, but the gradient of the BCE summed
    /// over each sequence and averaged over the batch's sequences.
    fn batch_loss(&self, batch: &Batch) -> Result<(f64, Grads)> {
        let total = batch.scored_steps();
        if total == 0 {
            return Err(Error::NoValidSteps);
        }
        let n_seqs = batch.rows().filter(|r| r.iter().any(EncodedStep::scored)).count();
        let grad_scale = total as f64 / n_seqs as f64;
        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        for row in batch.rows() {
            let (preds, streams) = self.forward_streams(row)?;
            let mut d_pred = vec![0.0; row.len()];
            for ((s, &p), d) in row.iter().zip(&preds).zip(&mut d_pred) {
                if !s.scored() {
                    continue;
                }
                let y = f64::from(s.y);
                let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                loss -= (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln()) / total as f64;
                if pc == p {
                    *d = grad_scale * (-y / p + (1.0 - y) / (1.0 - p)) / total as f64;
                }
            }
            let table = grads.get_mut(self.logits);
            for (k, obs, _) in &streams {
                let probs = self.probs(*k);
                let upstream: Vec<f64> = obs
                    .iter()
                    .map(|(t, _)| d_pred[*t] / row[*t].kcs.popcount() as f64)
                    .collect();
                let ys: Vec<u8> = obs.iter().map(|o| o.1).collect();
                let d = bkt_backward(&ys, &probs, &upstream);
                let pr = probs.to_array();
                let g = &mut table.data_mut()[k * 5..k * 5 + 5];
                for j in 0..5 {
                    g[j] += d[j] * pr[j] * (1.0 - pr[j]);
                }
            }
        }
        Ok((loss, grads))
    }
}
