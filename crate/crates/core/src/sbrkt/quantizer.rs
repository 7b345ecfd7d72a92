//! Sparse binary quantizer with learnable levels and straight-through gradients.
//!
//! Forward: a top-`C_max` mask over the latent vector, a positivity threshold,
//! and a two-level map `u = q·α + (1−q)·β` with `α = c(1+σ(p_α)) ∈ (c, 2c)` and
//! `β = c·σ(p_β) ∈ (0, c)`. Backward treats the discretization as the identity.

use std::sync::atomic::{AtomicU64, Ordering};

use super::config::Variant;
use crate::diff::{sigmoid, CustomOp, Graph, Tensor, Var};

static QUANTIZE_CALLS: AtomicU64 = AtomicU64::new(0);
static SPARSITY_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide counters of quantizer forward passes and sparsity violations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizerStats {
    pub calls: u64,
    pub violations: u64,
}

pub fn quantizer_stats() -> QuantizerStats {
    QuantizerStats {
        calls: QUANTIZE_CALLS.load(Ordering::Relaxed),
        violations: SPARSITY_VIOLATIONS.load(Ordering::Relaxed),
    }
}

fn record(bits: &[u8], c_max: usize) {
    QUANTIZE_CALLS.fetch_add(1, Ordering::Relaxed);
    let active = bits.iter().filter(|&&b| b == 1).count();
    if active > c_max {
        SPARSITY_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    debug_assert!(active <= c_max, "{active} active codes exceed C_max = {c_max}");
}

pub fn alpha(p_alpha: f64, c: f64) -> f64 {
    c * (1.0 + sigmoid(p_alpha))
}

/// Capped just below `c` so that `α ≥ c > β` survives rounding when σ saturates.
pub fn beta(p_beta: f64, c: f64) -> f64 {
    (c * sigmoid(p_beta)).min(c.next_down())
}

fn dsigmoid(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Indicator of the `c_max` largest entries; ties go to the lower index.
pub fn top_mask(e: &[f64], c_max: usize) -> Vec<u8> {
    let mut idx: Vec<usize> = (0..e.len()).collect();
    idx.sort_by(|&a, &b| e[b].total_cmp(&e[a]).then(a.cmp(&b)));
    let mut mask = vec![0u8; e.len()];
    for &i in idx.iter().take(c_max) {
        mask[i] = 1;
    }
    mask
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizerOutput {
    /// The code vector over {α, β}.
    pub u: Vec<f64>,
    /// Masked threshold output `Q(e)`.
    pub q_bits: Vec<u8>,
    pub mask: Vec<u8>,
    pub alpha: f64,
    pub beta: f64,
}

pub fn quantize(e: &[f64], p_alpha: f64, p_beta: f64, c_max: usize, c: f64) -> QuantizerOutput {
    let mask = top_mask(e, c_max);
    let q_bits: Vec<u8> = e
        .iter()
        .zip(&mask)
        .map(|(&x, &m)| u8::from(x > 0.0) * m)
        .collect();
    record(&q_bits, c_max);
    let (a, b) = (alpha(p_alpha, c), beta(p_beta, c));
    let u = q_bits.iter().map(|&q| if q == 1 { a } else { b }).collect();
    QuantizerOutput {
        u,
        q_bits,
        mask,
        alpha: a,
        beta: b,
    }
}

/// Straight-through gradients `(∂e, ∂p_α, ∂p_β)` for upstream gradient `g` on `u`.
pub fn quantize_backward(g: &[f64], q_bits: &[u8], p_alpha: f64, p_beta: f64, c: f64) -> (Vec<f64>, f64, f64) {
    let spread = alpha(p_alpha, c) - beta(p_beta, c);
    let de = g.iter().map(|gi| gi * spread).collect();
    let mut on = 0.0;
    let mut off = 0.0;
    for (gi, &q) in g.iter().zip(q_bits) {
        if q == 1 {
            on += gi;
        } else {
            off += gi;
        }
    }
    (de, on * c * dsigmoid(p_alpha), off * c * dsigmoid(p_beta))
}

/// Ablation discretizers. `Tanh` outputs ±1 with masked entries at −1;
/// `ZeroOne` outputs {0,1} with masked entries at 0; `Dense` is the identity.
pub fn quantize_variant(e: &[f64], variant: Variant, c_max: usize) -> Vec<f64> {
    match variant {
        Variant::Dense => e.to_vec(),
        Variant::Tanh => {
            let mask = top_mask(e, c_max);
            let bits: Vec<u8> = e
                .iter()
                .zip(&mask)
                .map(|(&x, &m)| u8::from(x.tanh() > 0.0) * m)
                .collect();
            record(&bits, c_max);
            bits.iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect()
        }
        Variant::ZeroOne => {
            let mask = top_mask(e, c_max);
            let bits: Vec<u8> = e
                .iter()
                .zip(&mask)
                .map(|(&x, &m)| u8::from(sigmoid(x) >= 0.5) * m)
                .collect();
            record(&bits, c_max);
            bits.iter().map(|&b| f64::from(b)).collect()
        }
        Variant::AlphaBeta => panic!("alphabeta variant uses `quantize`"),
    }
}

/// Presence bits of a code vector, for any discrete variant.
pub fn presence_bits(u: &[f64], variant: Variant, threshold_alpha: f64) -> Vec<u8> {
    match variant {
        Variant::AlphaBeta => u.iter().map(|&v| u8::from(v == threshold_alpha)).collect(),
        Variant::Tanh | Variant::ZeroOne => u.iter().map(|&v| u8::from(v == 1.0)).collect(),
        Variant::Dense => panic!("dense codes have no presence bits"),
    }
}

struct AlphaBetaOp {
    q_bits: Vec<u8>,
    c: f64,
}

impl CustomOp for AlphaBetaOp {
    fn name(&self) -> &'static str {
        "quantize_alphabeta"
    }

    fn backward(&self, grad: &[f64], parents: &[&Tensor], _output: &Tensor) -> Vec<Option<Vec<f64>>> {
        let (de, dpa, dpb) = quantize_backward(grad, &self.q_bits, parents[1].item(), parents[2].item(), self.c);
        vec![Some(de), Some(vec![dpa]), Some(vec![dpb])]
    }
}

/// Identity-gradient discretizer used by the ablations.
struct SteIdentityOp;

impl CustomOp for SteIdentityOp {
    fn name(&self) -> &'static str {
        "ste_discretize"
    }

    fn backward(&self, grad: &[f64], _parents: &[&Tensor], _output: &Tensor) -> Vec<Option<Vec<f64>>> {
        vec![Some(grad.to_vec())]
    }
}

/// Apply the configured quantizer on a graph. Returns the code node and, for
/// discrete variants, the presence bits.
pub fn quantize_on_graph(
    g: &mut Graph,
    e: Var,
    p_alpha: Var,
    p_beta: Var,
    variant: Variant,
    c_max: usize,
    c: f64,
) -> (Var, Option<Vec<u8>>) {
    match variant {
        Variant::AlphaBeta => {
            let out = quantize(
                g.value(e).data(),
                g.value(p_alpha).item(),
                g.value(p_beta).item(),
                c_max,
                c,
            );
            let v = g.custom(
                Box::new(AlphaBetaOp {
                    q_bits: out.q_bits.clone(),
                    c,
                }),
                &[e, p_alpha, p_beta],
                Tensor::vector(out.u),
            );
            (v, Some(out.q_bits))
        }
        Variant::Tanh | Variant::ZeroOne => {
            let squashed = if variant == Variant::Tanh { g.tanh(e) } else { g.sigmoid(e) };
            let code = quantize_variant(g.value(e).data(), variant, c_max);
            let bits = presence_bits(&code, variant, 0.0);
            let v = g.custom(Box::new(SteIdentityOp), &[squashed], Tensor::vector(code));
            (v, Some(bits))
        }
        Variant::Dense => (e, None),
    }
}
