use super::params::{Grads, ParamId, ParamSet};
use crate::error::Result;

/// Denominator floor for the relative error; keeps near-zero gradients from
/// turning rounding noise into large relative errors.
pub const REL_ERR_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct EntryCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub entries: Vec<EntryCheck>,
    pub max_rel_err: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tol
    }

    pub fn failures(&self) -> impl Iterator<Item = &EntryCheck> {
        self.entries.iter().filter(move |e| e.rel_err > self.tol)
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// Compare reverse-mode gradients against central differences `(f(θ+h) − f(θ−h)) / 2h`.
///
/// `eval` returns the loss and its reverse-mode gradient. Only the parameters
/// in `only` are perturbed when given.
pub fn grad_check<F>(
    params: &ParamSet,
    h: f64,
    tol: f64,
    only: Option<&[ParamId]>,
    mut eval: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(f64, Grads)>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, analytic) = eval(params)?;
    let mut work = params.clone();
    let mut report = GradCheckReport {
        tol,
        ..Default::default()
    };
    let ids: Vec<ParamId> = match only {
        Some(ids) => ids.to_vec(),
        None => params.ids().collect(),
    };
    for id in ids {
        for k in 0..params.get(id).len() {
            let orig = params.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + h;
            let (fp, _) = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig - h;
            let (fm, _) = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.get(id).data()[k];
            let e = rel_err(a, numeric);
            report.max_rel_err = report.max_rel_err.max(e);
            report.entries.push(EntryCheck {
                param: params.name(id).to_string(),
                index: k,
                analytic: a,
                numeric,
                rel_err: e,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{Graph, Tensor};

    #[test]
    fn sigmoid_at_zero() {
        let mut ps = ParamSet::new();
        ps.push("x", Tensor::scalar(0.0));
        let report = grad_check(&ps, 1e-6, 1e-8, None, |p| {
            let mut g = Graph::new();
            let x = g.param(p, ParamId(0));
            let s = g.sigmoid(x);
            g.backward(s);
            Ok((g.value(s).item(), g.param_grads(p)))
        })
        .unwrap();
        assert_eq!(report.entries[0].analytic, 0.25);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn half_square_gradient_is_exact() {
        let mut ps = ParamSet::new();
        ps.push("x", Tensor::scalar(3.0));
        let report = grad_check(&ps, 1e-6, 1e-8, None, |p| {
            let mut g = Graph::new();
            let x = g.param(p, ParamId(0));
            let sq = g.mul(x, x)?;
            let half = g.constant(Tensor::scalar(0.5));
            let l = g.mul(sq, half)?;
            g.backward(l);
            Ok((g.value(l).item(), g.param_grads(p)))
        })
        .unwrap();
        assert_eq!(report.entries[0].analytic, 3.0);
        assert!(report.passed());
    }
}
