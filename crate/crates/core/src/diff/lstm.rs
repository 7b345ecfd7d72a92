use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamSet};
use super::tensor::Tensor;
use crate::error::Result;

/// Parameter handles for one LSTM layer mapping `input → hidden`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// LSTM parameters bound as leaves on a particular graph.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b: Var,
}

impl LstmParams {
    /// Weights ~ U(−1/√H, 1/√H); biases zero except the forget gate at 1.0.
    pub fn init<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        let mut draw = |n: usize| (0..n).map(|_| dist.sample(rng)).collect::<Vec<_>>();
        let w_ih = Tensor::matrix(4 * hidden, input, draw(4 * hidden * input)).expect("shape");
        let w_hh = Tensor::matrix(4 * hidden, hidden, draw(4 * hidden * hidden)).expect("shape");
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(1.0);
        LstmParams {
            w_ih: params.push(format!("{prefix}.w_ih"), w_ih),
            w_hh: params.push(format!("{prefix}.w_hh"), w_hh),
            b: params.push(format!("{prefix}.b"), Tensor::vector(b)),
            input,
            hidden,
        }
    }

    /// Recover handles from a loaded parameter set.
    pub fn locate(params: &ParamSet, prefix: &str) -> Option<Self> {
        let w_ih = params.find(&format!("{prefix}.w_ih"))?;
        let w_hh = params.find(&format!("{prefix}.w_hh"))?;
        let b = params.find(&format!("{prefix}.b"))?;
        let shape = params.get(w_ih).shape();
        Some(LstmParams {
            w_ih,
            w_hh,
            b,
            input: shape[1],
            hidden: shape[0] / 4,
        })
    }

    pub fn bind(&self, g: &mut Graph, params: &ParamSet) -> LstmVars {
        LstmVars {
            w_ih: g.param(params, self.w_ih),
            w_hh: g.param(params, self.w_hh),
            b: g.param(params, self.b),
        }
    }
}

impl LstmVars {
    pub fn step(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        g.lstm_cell(x, h, c, self.w_ih, self.w_hh, self.b)
    }
}
