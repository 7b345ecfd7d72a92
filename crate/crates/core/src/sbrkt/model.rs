use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::config::{SbrktConfig, Variant};
use super::quantizer::{quantize, quantize_on_graph, quantize_variant};
use crate::data::{attach_label, Batch, EncodedStep};
use crate::diff::{Graph, Grads, LstmParams, ParamId, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::eval::SequencePredictor;
use crate::train::GradModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SbrktIds {
    pub x_ex: ParamId,
    pub w_ex: ParamId,
    pub b_ex: ParamId,
    pub p_alpha: ParamId,
    pub p_beta: ParamId,
    pub w_proj: ParamId,
    pub lstm: LstmParams,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

impl SbrktIds {
    /// Parameters that sit upstream of the straight-through discretizer.
    pub fn ste_params(&self) -> [ParamId; 3] {
        [self.x_ex, self.w_ex, self.b_ex]
    }
}

/// Per-step forward results.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub y_hat: f64,
    /// Logits over KCs and auxiliary KCs, computed from the state before this step.
    pub logits: Vec<f64>,
    /// LSTM state after consuming this step.
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sbrkt {
    pub config: SbrktConfig,
    pub params: ParamSet,
    pub ids: SbrktIds,
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let d = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| d.sample(rng)).collect()).expect("shape")
}

struct Bound {
    x_ex: ParamId,
    w_ex: Var,
    b_ex: Var,
    p_alpha: Var,
    p_beta: Var,
    w_proj: Var,
    lstm: crate::diff::LstmVars,
    w_out: Var,
    b_out: Var,
}

impl Sbrkt {
    pub fn new(config: SbrktConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &config;
        let mut ps = ParamSet::new();
        let normal = Normal::new(0.0, 0.1).expect("valid normal");
        let table: Vec<f64> = (0..(c.n_questions + 1) * c.emb_dim).map(|_| normal.sample(&mut rng)).collect();
        let x_ex = ps.push("x_ex", Tensor::matrix(c.n_questions + 1, c.emb_dim, table)?);
        let w_ex = ps.push(
            "w_ex",
            uniform(c.n_aux, c.emb_dim, 1.0 / (c.emb_dim as f64).sqrt(), &mut rng),
        );
        let b_ex = ps.push("b_ex", Tensor::zeros(&[c.n_aux]));
        let p_alpha = ps.push("p_alpha", Tensor::scalar(0.0));
        let p_beta = ps.push("p_beta", Tensor::scalar(0.0));
        let in_dim = 2 * c.n_kcs + 2 * c.n_aux;
        let w_proj = ps.push(
            "w_proj",
            uniform(c.proj_dim, in_dim, 1.0 / (in_dim as f64).sqrt(), &mut rng),
        );
        let lstm = LstmParams::init(&mut ps, "lstm", c.proj_dim, c.hidden, &mut rng);
        let out_dim = c.n_kcs + c.n_aux;
        let w_out = ps.push(
            "w_out",
            uniform(out_dim, c.hidden, 1.0 / (c.hidden as f64).sqrt(), &mut rng),
        );
        let b_out = ps.push("b_out", Tensor::zeros(&[out_dim]));
        Ok(Sbrkt {
            config,
            params: ps,
            ids: SbrktIds {
                x_ex,
                w_ex,
                b_ex,
                p_alpha,
                p_beta,
                w_proj,
                lstm,
                w_out,
                b_out,
            },
        })
    }

    /// Rebuild a model around a loaded parameter set, checking every shape.
    pub fn from_params(config: SbrktConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let reference = Sbrkt::new(config.clone(), 0)?;
        for (id, name, t) in reference.params.iter() {
            let got = params
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if got != id || params.get(got).shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    params.get(got).shape(),
                    t.shape()
                )));
            }
        }
        if params.len() != reference.params.len() {
            return Err(Error::Checkpoint("unexpected extra parameters".into()));
        }
        Ok(Sbrkt {
            config,
            ids: reference.ids,
            params,
        })
    }

    fn check_question(&self, q: usize) -> Result<()> {
        let rows = self.config.n_questions + 1;
        if q >= rows {
            return Err(Error::Index {
                index: q,
                size: rows,
                what: "exercise table",
            });
        }
        Ok(())
    }

    /// Latent exercise vector `W x_q + b`.
    pub fn embed_exercise(&self, q: usize) -> Result<Vec<f64>> {
        self.check_question(q)?;
        let x = self.params.get(self.ids.x_ex).row(q);
        let w = self.params.get(self.ids.w_ex);
        let b = self.params.get(self.ids.b_ex).data();
        Ok(b.iter()
            .enumerate()
            .map(|(i, bi)| bi + w.row(i).iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect())
    }

    pub fn p_alpha(&self) -> f64 {
        self.params.get(self.ids.p_alpha).item()
    }

    pub fn p_beta(&self) -> f64 {
        self.params.get(self.ids.p_beta).item()
    }

    /// The code vector the model uses for question `q`, plus its presence bits for discrete variants.
    pub fn code(&self, q: usize) -> Result<(Vec<f64>, Option<Vec<u8>>)> {
        let e = self.embed_exercise(q)?;
        let c = &self.config;
        Ok(match c.variant {
            Variant::AlphaBeta => {
                let out = quantize(&e, self.p_alpha(), self.p_beta(), c.c_max, c.level_scale);
                (out.u, Some(out.q_bits))
            }
            Variant::Dense => (e, None),
            v => {
                let u = quantize_variant(&e, v, c.c_max);
                let bits = super::quantizer::presence_bits(&u, v, 0.0);
                (u, Some(bits))
            }
        })
    }

    /// `W_proj (u_kc_y ⊕ u_ex_y)`.
    pub fn step_input(&self, u_kc_y: &[f64], u_ex_y: &[f64]) -> Result<Vec<f64>> {
        let c = &self.config;
        if u_kc_y.len() != 2 * c.n_kcs || u_ex_y.len() != 2 * c.n_aux {
            return Err(Error::Dimension {
                lhs: vec![u_kc_y.len(), u_ex_y.len()],
                rhs: vec![2 * c.n_kcs, 2 * c.n_aux],
                context: "step_input",
            });
        }
        let w = self.params.get(self.ids.w_proj);
        let v: Vec<f64> = u_kc_y.iter().chain(u_ex_y).copied().collect();
        Ok((0..w.rows())
            .map(|r| w.row(r).iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn bind(&self, g: &mut Graph, params: &ParamSet) -> Bound {
        Bound {
            x_ex: self.ids.x_ex,
            w_ex: g.param(params, self.ids.w_ex),
            b_ex: g.param(params, self.ids.b_ex),
            p_alpha: g.param(params, self.ids.p_alpha),
            p_beta: g.param(params, self.ids.p_beta),
            w_proj: g.param(params, self.ids.w_proj),
            lstm: self.ids.lstm.bind(g, params),
            w_out: g.param(params, self.ids.w_out),
            b_out: g.param(params, self.ids.b_out),
        }
    }

    /// Build the forward graph for one sequence. Returns per-step prediction
    /// nodes (`ŷ_t`), logit nodes and post-step LSTM states.
    ///
    /// `ŷ_t` uses the state after steps `1..t−1` only; the labeled input of
    /// step `t` advances the LSTM after the prediction is made.
    #[allow(clippy::type_complexity)]
    fn build(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        steps: &[EncodedStep],
        keep_states: bool,
    ) -> Result<(Vec<Var>, Vec<Var>, Vec<(Var, Var)>)> {
        if steps.is_empty() {
            return Err(Error::InvalidInput("empty step sequence".into()));
        }
        let cfg = &self.config;
        let b = self.bind(g, params);
        let mut h = g.constant(Tensor::zeros(&[cfg.hidden]));
        let mut c = g.constant(Tensor::zeros(&[cfg.hidden]));
        let mut preds = Vec::with_capacity(steps.len());
        let mut logits = Vec::with_capacity(steps.len());
        let mut states = Vec::new();
        for (t, step) in steps.iter().enumerate() {
            self.check_question(step.q)?;
            if step.kcs.len() != cfg.n_kcs {
                return Err(Error::Dimension {
                    lhs: vec![step.kcs.len()],
                    rhs: vec![cfg.n_kcs],
                    context: "step KC multi-hot",
                });
            }
            let x = g.gather_mean(params, b.x_ex, &[step.q])?;
            let e = g.affine(b.w_ex, x, Some(b.b_ex))?;
            let (code, _) = quantize_on_graph(g, e, b.p_alpha, b.p_beta, cfg.variant, cfg.c_max, cfg.level_scale);
            let u_kc = step.kcs.to_dense();

            let o = g.affine(b.w_out, h, Some(b.b_out))?;
            let kc_node = g.constant(Tensor::vector(u_kc.clone()));
            let u = g.concat(&[kc_node, code])?;
            let score = g.dot(u, o)?;
            preds.push(g.sigmoid(score));
            logits.push(o);

            if t + 1 == steps.len() && !keep_states {
                break;
            }
            let kc_y = g.constant(Tensor::vector(attach_label(&u_kc, step.y)));
            let code_y = g.attach_label(code, step.y);
            let v = g.concat(&[kc_y, code_y])?;
            let z = g.affine(b.w_proj, v, None)?;
            (h, c) = b.lstm.step(g, z, h, c)?;
            if keep_states {
                states.push((h, c));
            }
        }
        Ok((preds, logits, states))
    }

    pub fn forward_sequence(&self, steps: &[EncodedStep]) -> Result<Vec<StepOutput>> {
        let mut g = Graph::new();
        let (preds, logits, states) = self.build(&mut g, &self.params, steps, true)?;
        Ok(preds
            .iter()
            .zip(&logits)
            .zip(&states)
            .map(|((p, o), (h, c))| StepOutput {
                y_hat: g.value(*p).item(),
                logits: g.value(*o).data().to_vec(),
                h: g.value(*h).data().to_vec(),
                c: g.value(*c).data().to_vec(),
            })
            .collect())
    }

    /// Masked-mean BCE over the scored steps of a batch, with parameter gradients.
    pub fn loss_and_grads(&self, params: &ParamSet, batch: &Batch) -> Result<(f64, Grads)> {
        sequence_batch_loss(params, batch, |g, steps| {
            let (preds, _, _) = self.build(g, params, steps, false)?;
            Ok(preds)
        })
    }

    pub fn sbrkt_loss(&self, batch: &Batch) -> Result<f64> {
        Ok(self.loss_and_grads(&self.params, batch)?.0)
    }
}

/// Shared masked-BCE batch objective for sequence models built one row at a time.
///
/// Each row's graph is differentiated separately and its gradient weighted by
/// its share of the batch's scored steps, which equals the gradient of the
/// batch-level masked mean.
pub(crate) fn sequence_batch_loss<F>(params: &ParamSet, batch: &Batch, mut build: F) -> Result<(f64, Grads)>
where
    F: FnMut(&mut Graph, &[EncodedStep]) -> Result<Vec<Var>>,
{
    let total = batch.scored_steps();
    if total == 0 {
        return Err(Error::NoValidSteps);
    }
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for row in batch.rows() {
        let scored = row.iter().filter(|s| s.scored()).count();
        if scored == 0 {
            continue;
        }
        let mut g = Graph::new();
        let preds = build(&mut g, row)?;
        let p = g.concat(&preds)?;
        let y: Vec<f64> = row.iter().map(|s| f64::from(s.y)).collect();
        let mask: Vec<f64> = row.iter().map(|s| f64::from(u8::from(s.scored()))).collect();
        let l = g.bce_loss(p, &y, &mask)?;
        let w = scored as f64 / total as f64;
        loss += w * g.value(l).item();
        g.backward_scaled(l, w);
        g.accumulate_param_grads(&mut grads, 1.0);
    }
    Ok((loss, grads))
}

impl SequencePredictor for Sbrkt {
    fn predict(&self, steps: &[EncodedStep]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let (preds, _, _) = self.build(&mut g, &self.params, steps, false)?;
        Ok(preds.iter().map(|p| g.value(*p).item()).collect())
    }
}

impl GradModel for Sbrkt {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn batch_loss(&self, batch: &Batch) -> Result<(f64, Grads)> {
        self.loss_and_grads(&self.params, batch)
    }
}
