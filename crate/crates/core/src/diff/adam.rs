use super::params::{Grads, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam optimizer with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Tensor] {
        &self.v
    }

    /// Apply one update. Gradients are checked for NaN/Inf before anything is modified.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) -> Result<()> {
        for id in params.ids() {
            let (p, g) = (params.get(id), grads.get(id));
            if p.shape() != g.shape() {
                return Err(Error::Dimension {
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                    context: "adam parameter vs gradient",
                });
            }
            if !g.all_finite() {
                return Err(Error::NonFiniteGradient(params.name(id).to_string()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for id in params.ids() {
            let g = grads.get(id).data();
            let m = self.m[id.0].data_mut();
            let v = self.v[id.0].data_mut();
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                p[k] -= self.lr * mh / (vh.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::scalar(value));
        ps
    }

    fn grad(value: f64) -> Grads {
        Grads(vec![Tensor::scalar(value)])
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut ps = single(0.5);
        let mut adam = Adam::new(&ps, 1e-3);
        adam.step(&mut ps, &grad(1.0)).unwrap();
        assert!((ps.get(super::super::ParamId(0)).item() - (0.5 - 1e-3)).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut ps = single(0.5);
        let mut adam = Adam::new(&ps, 1e-3);
        adam.step(&mut ps, &grad(0.0)).unwrap();
        assert_eq!(ps.get(super::super::ParamId(0)).item(), 0.5);
    }

    #[test]
    fn two_constant_steps_each_move_by_lr() {
        // Hand recursion: m1=0.1, v1=0.001 → m̂=1, v̂=1; m2=0.19, v2=0.001999
        // → m̂=0.19/0.19=1, v̂=0.001999/0.001999=1. Both updates are lr/(1+eps).
        let mut ps = single(0.0);
        let mut adam = Adam::new(&ps, 1e-3);
        let expected = 1e-3 / (1.0 + 1e-8);
        adam.step(&mut ps, &grad(1.0)).unwrap();
        let after1 = ps.get(super::super::ParamId(0)).item();
        adam.step(&mut ps, &grad(1.0)).unwrap();
        let after2 = ps.get(super::super::ParamId(0)).item();
        assert_eq!(adam.step_count(), 2);
        assert!((after1 + expected).abs() < 1e-15);
        assert!((after2 - after1 + expected).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut ps = single(0.5);
        let mut adam = Adam::new(&ps, 1e-3);
        let err = adam.step(&mut ps, &grad(f64::NAN)).unwrap_err();
        assert!(err.to_string().contains("`w`"));
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn zero_lr_is_bit_identical() {
        let mut ps = single(-0.123456789);
        let before = ps.clone();
        let mut adam = Adam::new(&ps, 0.0);
        for g in [1.0, -3.0, 0.5] {
            adam.step(&mut ps, &grad(g)).unwrap();
        }
        assert_eq!(ps, before);
    }
}
