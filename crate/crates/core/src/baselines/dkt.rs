//! DKT whose input is the mean of `(KC, correctness)` embeddings.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::data::{Batch, EncodedStep};
use crate::diff::{Graph, Grads, LstmParams, ParamId, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::eval::SequencePredictor;
use crate::sbrkt::sequence_batch_loss;
use crate::train::GradModel;

#[derive(Clone, Debug, PartialEq)]
pub struct DktConfig {
    pub n_kcs: usize,
    pub emb_dim: usize,
    pub hidden: usize,
}

impl DktConfig {
    pub fn new(n_kcs: usize) -> Self {
        DktConfig {
            n_kcs,
            emb_dim: 32,
            hidden: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_kcs == 0 || self.emb_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidInput(format!("DKT dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        [
            ("n_kcs", self.n_kcs),
            ("emb_dim", self.emb_dim),
            ("hidden", self.hidden),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| -> Result<usize> {
            kv.get(k)
                .ok_or_else(|| Error::Checkpoint(format!("missing config key `{k}`")))?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad value for `{k}`")))
        };
        Ok(DktConfig {
            n_kcs: get("n_kcs")?,
            emb_dim: get("emb_dim")?,
            hidden: get("hidden")?,
        })
    }
}

/// Row of the interaction table for KC `k` answered with `y`.
pub fn interaction_row(k: usize, y: u8) -> usize {
    2 * k + usize::from(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dkt {
    pub config: DktConfig,
    pub params: ParamSet,
    emb: ParamId,
    lstm: LstmParams,
    w_out: ParamId,
    b_out: ParamId,
}

impl Dkt {
    pub fn new(config: DktConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &config;
        let mut params = ParamSet::new();
        let normal = Normal::new(0.0, 0.1).expect("valid normal");
        let table = (0..2 * c.n_kcs * c.emb_dim).map(|_| normal.sample(&mut rng)).collect();
        let emb = params.push("dkt.emb", Tensor::matrix(2 * c.n_kcs, c.emb_dim, table)?);
        let lstm = LstmParams::init(&mut params, "dkt.lstm", c.emb_dim, c.hidden, &mut rng);
        let bound = 1.0 / (c.hidden as f64).sqrt();
        let u = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        let w = (0..c.n_kcs * c.hidden).map(|_| u.sample(&mut rng)).collect();
        let w_out = params.push("dkt.w_out", Tensor::matrix(c.n_kcs, c.hidden, w)?);
        let b_out = params.push("dkt.b_out", Tensor::zeros(&[c.n_kcs]));
        Ok(Dkt {
            config,
            params,
            emb,
            lstm,
            w_out,
            b_out,
        })
    }

    pub fn from_params(config: DktConfig, params: ParamSet) -> Result<Self> {
        let mut m = Dkt::new(config, 0)?;
        for (_, name, t) in m.params.iter() {
            let got = params
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if params.get(got).shape() != t.shape() {
                return Err(Error::Checkpoint(format!("parameter `{name}` has the wrong shape")));
            }
        }
        if params.len() != m.params.len() {
            return Err(Error::Checkpoint("unexpected extra parameters".into()));
        }
        m.params = params;
        Ok(m)
    }

    pub fn embedding_rows(&self) -> usize {
        self.params.get(self.emb).rows()
    }

    fn build(&self, g: &mut Graph, params: &ParamSet, steps: &[EncodedStep]) -> Result<Vec<Option<Var>>> {
        let cfg = &self.config;
        let lstm = self.lstm.bind(g, params);
        let w_out = g.param(params, self.w_out);
        let b_out = g.param(params, self.b_out);
        let mut h = g.constant(Tensor::zeros(&[cfg.hidden]));
        let mut c = g.constant(Tensor::zeros(&[cfg.hidden]));
        let mut preds = Vec::with_capacity(steps.len());
        for (t, step) in steps.iter().enumerate() {
            if step.kcs.len() != cfg.n_kcs {
                return Err(Error::Dimension {
                    lhs: vec![step.kcs.len()],
                    rhs: vec![cfg.n_kcs],
                    context: "DKT step KC multi-hot",
                });
            }
            let kcs = step.kcs.active();
            if kcs.is_empty() {
                preds.push(None);
                continue;
            }
            let o = g.affine(w_out, h, Some(b_out))?;
            let picked = g.select(o, kcs)?;
            let p = g.sigmoid(picked);
            preds.push(Some(g.mean(p)));
            if t + 1 == steps.len() {
                break;
            }
            let rows: Vec<usize> = kcs.iter().map(|&k| interaction_row(k, step.y)).collect();
            let x = g.gather_mean(params, self.emb, &rows)?;
            (h, c) = lstm.step(g, x, h, c)?;
        }
        Ok(preds)
    }
}

impl SequencePredictor for Dkt {
    fn predict(&self, steps: &[EncodedStep]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let preds = self.build(&mut g, &self.params, steps)?;
        Ok(preds.iter().map(|p| p.map_or(0.5, |v| g.value(v).item())).collect())
    }
}

impl GradModel for Dkt {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn batch_loss(&self, batch: &Batch) -> Result<(f64, Grads)> {
        sequence_batch_loss(&self.params, batch, |g, steps| {
            let preds = self.build(g, &self.params, steps)?;
            // unscored steps have no KCs; a constant keeps positions aligned with the mask
            Ok(preds
                .into_iter()
                .map(|p| p.unwrap_or_else(|| g.constant(Tensor::scalar(0.5))))
                .collect())
        })
    }
}
