//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so every parent index is smaller
//! than its child's and a reverse sweep over the tape is a valid topological
//! order for backpropagation.

use super::params::{Grads, ParamId, ParamSet};
use super::tensor::{matvec_acc, matvec_t_acc, outer_acc, Tensor};
use crate::error::{Error, Result};

/// Lower/upper clamp applied to probabilities inside [`Graph::bce_loss`].
pub const PROB_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A user-supplied differentiable operation.
///
/// `backward` receives the upstream gradient, the parents' values and the
/// forward output, and returns one optional gradient per parent.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;
    fn backward(&self, grad: &[f64], parents: &[&Tensor], output: &Tensor) -> Vec<Option<Vec<f64>>>;
}

enum Op {
    Constant,
    Param(ParamId),
    GatherMean { param: ParamId, rows: Vec<usize> },
    Affine { bias: bool },
    Sigmoid,
    Tanh,
    Add,
    Mul,
    Concat,
    AttachLabel { y: f64 },
    Dot,
    Select { idx: Vec<usize> },
    Mean,
    Slice { start: usize },
    Lstm { cache: Vec<f64> },
    Bce { y: Vec<f64>, weight: Vec<f64> },
    Custom(Box<dyn CustomOp>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::GatherMean { .. } => "gather_mean",
            Op::Affine { .. } => "affine",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::Concat => "concat",
            Op::AttachLabel { .. } => "attach_label",
            Op::Dot => "dot",
            Op::Select { .. } => "select",
            Op::Mean => "mean",
            Op::Slice { .. } => "slice",
            Op::Lstm { .. } => "lstm_cell",
            Op::Bce { .. } => "bce_loss",
            Op::Custom(c) => c.name(),
        }
    }
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
    parents: Vec<Var>,
    requires_grad: bool,
}

/// Single-threaded computation graph.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn slot<'a>(nodes: &[Node], adj: &'a mut [Option<Vec<f64>>], p: Var) -> &'a mut Vec<f64> {
    let len = nodes[p.0].value.len();
    adj[p.0].get_or_insert_with(|| vec![0.0; len])
}

fn dim_err(lhs: &[usize], rhs: &[usize], context: &'static str) -> Error {
    Error::Dimension {
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
        context,
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    pub fn parents(&self, v: Var) -> &[Var] {
        &self.nodes[v.0].parents
    }

    /// Clear accumulated gradients on every node.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, op: Op, parents: Vec<Var>) -> Var {
        let requires_grad = match op {
            Op::Constant => false,
            Op::Param(_) | Op::GatherMean { .. } => true,
            _ => parents.iter().any(|p| self.nodes[p.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            parents,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, vec![])
    }

    /// Leaf holding a copy of a parameter; its gradient is routed back by [`Graph::param_grads`].
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.push(params.get(id).clone(), Op::Param(id), vec![])
    }

    /// Mean of selected rows of a matrix parameter (embedding lookup).
    pub fn gather_mean(&mut self, params: &ParamSet, id: ParamId, rows: &[usize]) -> Result<Var> {
        let table = params.get(id);
        if rows.is_empty() {
            return Err(Error::InvalidInput("gather_mean over no rows".into()));
        }
        let cols = table.cols();
        let mut out = vec![0.0; cols];
        for &r in rows {
            if r >= table.rows() {
                return Err(Error::Index {
                    index: r,
                    size: table.rows(),
                    what: "embedding table",
                });
            }
            for (o, v) in out.iter_mut().zip(table.row(r)) {
                *o += v;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(self.push(
            Tensor::vector(out),
            Op::GatherMean {
                param: id,
                rows: rows.to_vec(),
            },
            vec![],
        ))
    }

    /// `W x + b` (or `W x` when `b` is `None`).
    pub fn affine(&mut self, w: Var, x: Var, b: Option<Var>) -> Result<Var> {
        let (wv, xv) = (self.value(w), self.value(x));
        if wv.shape().len() != 2 || xv.shape().len() != 1 || wv.cols() != xv.len() {
            return Err(dim_err(wv.shape(), xv.shape(), "affine W·x"));
        }
        let m = wv.rows();
        let mut out = match b {
            Some(b) => {
                let bv = self.value(b);
                if bv.shape() != [m] {
                    return Err(dim_err(wv.shape(), bv.shape(), "affine bias"));
                }
                bv.data().to_vec()
            }
            None => vec![0.0; m],
        };
        matvec_acc(wv.data(), wv.cols(), xv.data(), &mut out);
        let mut parents = vec![w, x];
        parents.extend(b);
        Ok(self.push(Tensor::vector(out), Op::Affine { bias: b.is_some() }, parents))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let out = xv.data().iter().map(|&v| sigmoid(v)).collect();
        let t = Tensor::new(xv.shape().to_vec(), out).expect("shape preserved");
        self.push(t, Op::Sigmoid, vec![x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let out = xv.data().iter().map(|v| v.tanh()).collect();
        let t = Tensor::new(xv.shape().to_vec(), out).expect("shape preserved");
        self.push(t, Op::Tanh, vec![x])
    }

    fn zip_op(&mut self, a: Var, b: Var, op: Op, f: fn(f64, f64) -> f64) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dim_err(av.shape(), bv.shape(), op.name()));
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        let t = Tensor::new(av.shape().to_vec(), out).expect("shape preserved");
        Ok(self.push(t, op, vec![a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, Op::Add, |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, Op::Mul, |x, y| x * y)
    }

    /// Concatenate vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.shape().len() != 1 {
                return Err(dim_err(v.shape(), &[v.len()], "concat expects vectors"));
            }
            out.extend_from_slice(v.data());
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("concat of nothing".into()));
        }
        Ok(self.push(Tensor::vector(out), Op::Concat, parts.to_vec()))
    }

    /// `(u·y) ⊕ (u·(1−y))` for a binary label `y`.
    pub fn attach_label(&mut self, u: Var, y: u8) -> Var {
        let out = crate::data::attach_label(self.value(u).data(), y);
        self.push(
            Tensor::vector(out),
            Op::AttachLabel { y: f64::from(y) },
            vec![u],
        )
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dim_err(av.shape(), bv.shape(), "dot"));
        }
        let s = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot, vec![a, b]))
    }

    pub fn select(&mut self, v: Var, idx: &[usize]) -> Result<Var> {
        let vv = self.value(v);
        let mut out = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= vv.len() {
                return Err(Error::Index {
                    index: i,
                    size: vv.len(),
                    what: "select",
                });
            }
            out.push(vv.data()[i]);
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("select of no entries".into()));
        }
        Ok(self.push(
            Tensor::vector(out),
            Op::Select { idx: idx.to_vec() },
            vec![v],
        ))
    }

    pub fn slice(&mut self, v: Var, start: usize, len: usize) -> Result<Var> {
        let vv = self.value(v);
        if len == 0 || start + len > vv.len() {
            return Err(dim_err(&[start, len], vv.shape(), "slice"));
        }
        let out = vv.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(out), Op::Slice { start }, vec![v]))
    }

    pub fn mean(&mut self, v: Var) -> Var {
        let vv = self.value(v);
        let m = vv.data().iter().sum::<f64>() / vv.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean, vec![v])
    }

    /// Standard LSTM cell with gate order (input, forget, candidate, output).
    ///
    /// `w_ih` is `[4H, D]`, `w_hh` is `[4H, H]`, `b` is `[4H]`.
    #[allow(clippy::too_many_arguments)]
    pub fn lstm_cell(
        &mut self,
        x: Var,
        h_prev: Var,
        c_prev: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
    ) -> Result<(Var, Var)> {
        let (wi, wh, bv) = (self.value(w_ih), self.value(w_hh), self.value(b));
        let (xv, hv, cv) = (self.value(x), self.value(h_prev), self.value(c_prev));
        let h = hv.len();
        if wh.shape() != [4 * h, h] || bv.shape() != [4 * h] || cv.shape() != [h] {
            return Err(dim_err(wh.shape(), &[4 * h, h], "lstm recurrent weights"));
        }
        if wi.shape().len() != 2 || wi.rows() != 4 * h || wi.cols() != xv.len() {
            return Err(dim_err(wi.shape(), xv.shape(), "lstm input weights"));
        }
        let mut a = bv.data().to_vec();
        matvec_acc(wi.data(), wi.cols(), xv.data(), &mut a);
        matvec_acc(wh.data(), h, hv.data(), &mut a);
        // cache layout: i | f | g | o | tanh(c)
        let mut cache = vec![0.0; 5 * h];
        let mut state = vec![0.0; 2 * h];
        for k in 0..h {
            let i = sigmoid(a[k]);
            let f = sigmoid(a[h + k]);
            let g = a[2 * h + k].tanh();
            let o = sigmoid(a[3 * h + k]);
            let c = f * cv.data()[k] + i * g;
            let tc = c.tanh();
            cache[k] = i;
            cache[h + k] = f;
            cache[2 * h + k] = g;
            cache[3 * h + k] = o;
            cache[4 * h + k] = tc;
            state[k] = o * tc;
            state[h + k] = c;
        }
        let s = self.push(
            Tensor::vector(state),
            Op::Lstm { cache },
            vec![x, h_prev, c_prev, w_ih, w_hh, b],
        );
        let hn = self.slice(s, 0, h)?;
        let cn = self.slice(s, h, h)?;
        Ok((hn, cn))
    }

    /// Masked mean binary cross-entropy, returning a `[1]` node.
    pub fn bce_loss(&mut self, p: Var, y: &[f64], mask: &[f64]) -> Result<Var> {
        let pv = self.value(p);
        if pv.len() != y.len() || y.len() != mask.len() {
            return Err(dim_err(pv.shape(), &[y.len(), mask.len()], "bce_loss"));
        }
        let total: f64 = mask.iter().sum();
        if total <= 0.0 {
            return Err(Error::NoValidSteps);
        }
        let weight: Vec<f64> = mask.iter().map(|m| m / total).collect();
        let mut loss = 0.0;
        for ((&pi, &yi), &wi) in pv.data().iter().zip(y).zip(&weight) {
            if wi == 0.0 {
                continue;
            }
            let pc = pi.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss -= wi * (yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln());
        }
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                y: y.to_vec(),
                weight,
            },
            vec![p],
        ))
    }

    pub fn custom(&mut self, op: Box<dyn CustomOp>, parents: &[Var], value: Tensor) -> Var {
        self.push(value, Op::Custom(op), parents.to_vec())
    }

    pub fn backward(&mut self, root: Var) {
        self.backward_scaled(root, 1.0);
    }

    /// Backpropagate `seed · ∂root/∂·`, adding into every node's stored gradient.
    pub fn backward_scaled(&mut self, root: Var, seed: f64) {
        let n = root.0 + 1;
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; n];
        adj[root.0] = Some(vec![seed; self.nodes[root.0].value.len()]);

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut adj);
            }
            adj[i] = Some(g);
        }

        for (node, a) in self.nodes.iter_mut().zip(adj) {
            if let Some(a) = a {
                let t = Tensor::new(node.value.shape().to_vec(), a).expect("grad shape");
                match &mut node.grad {
                    Some(existing) => existing.add_assign(&t),
                    None => node.grad = Some(t),
                }
            }
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let needs = |p: Var| nodes[p.0].requires_grad;
        macro_rules! acc {
            ($p:expr) => {
                slot(nodes, adj, $p)
            };
        }
        let p = &node.parents;
        match &node.op {
            Op::Constant | Op::Param(_) | Op::GatherMean { .. } => {}
            Op::Affine { bias } => {
                let (w, x) = (&nodes[p[0].0].value, &nodes[p[1].0].value);
                if needs(p[0]) {
                    outer_acc(g, x.data(), acc!(p[0]));
                }
                if needs(p[1]) {
                    matvec_t_acc(w.data(), w.cols(), g, acc!(p[1]));
                }
                if *bias && needs(p[2]) {
                    for (d, gi) in acc!(p[2]).iter_mut().zip(g) {
                        *d += gi;
                    }
                }
            }
            Op::Sigmoid => {
                let d = acc!(p[0]);
                for ((d, gi), s) in d.iter_mut().zip(g).zip(node.value.data()) {
                    *d += gi * s * (1.0 - s);
                }
            }
            Op::Tanh => {
                let d = acc!(p[0]);
                for ((d, gi), t) in d.iter_mut().zip(g).zip(node.value.data()) {
                    *d += gi * (1.0 - t * t);
                }
            }
            Op::Add => {
                for &q in &p[..2] {
                    if needs(q) {
                        for (d, gi) in acc!(q).iter_mut().zip(g) {
                            *d += gi;
                        }
                    }
                }
            }
            Op::Mul => {
                let (a, b) = (&nodes[p[0].0].value, &nodes[p[1].0].value);
                if needs(p[0]) {
                    for ((d, gi), bv) in acc!(p[0]).iter_mut().zip(g).zip(b.data()) {
                        *d += gi * bv;
                    }
                }
                if needs(p[1]) {
                    for ((d, gi), av) in acc!(p[1]).iter_mut().zip(g).zip(a.data()) {
                        *d += gi * av;
                    }
                }
            }
            Op::Concat => {
                let mut off = 0;
                for &q in p {
                    let len = nodes[q.0].value.len();
                    if needs(q) {
                        for (d, gi) in acc!(q).iter_mut().zip(&g[off..off + len]) {
                            *d += gi;
                        }
                    }
                    off += len;
                }
            }
            Op::AttachLabel { y } => {
                let l = nodes[p[0].0].value.len();
                for (k, d) in acc!(p[0]).iter_mut().enumerate() {
                    *d += g[k] * y + g[l + k] * (1.0 - y);
                }
            }
            Op::Dot => {
                let (a, b) = (&nodes[p[0].0].value, &nodes[p[1].0].value);
                let s = g[0];
                if needs(p[0]) {
                    for (d, bv) in acc!(p[0]).iter_mut().zip(b.data()) {
                        *d += s * bv;
                    }
                }
                if needs(p[1]) {
                    for (d, av) in acc!(p[1]).iter_mut().zip(a.data()) {
                        *d += s * av;
                    }
                }
            }
            Op::Select { idx } => {
                let d = acc!(p[0]);
                for (&i, gi) in idx.iter().zip(g) {
                    d[i] += gi;
                }
            }
            Op::Mean => {
                let d = acc!(p[0]);
                let s = g[0] / d.len() as f64;
                d.iter_mut().for_each(|v| *v += s);
            }
            Op::Slice { start } => {
                let d = acc!(p[0]);
                for (k, gi) in g.iter().enumerate() {
                    d[start + k] += gi;
                }
            }
            Op::Lstm { cache } => self.lstm_backward(node, cache, g, adj),
            Op::Bce { y, weight } => {
                let pv = nodes[p[0].0].value.data();
                let d = acc!(p[0]);
                for k in 0..pv.len() {
                    if weight[k] == 0.0 || pv[k] < PROB_CLAMP || pv[k] > 1.0 - PROB_CLAMP {
                        continue;
                    }
                    let (pk, yk) = (pv[k], y[k]);
                    d[k] += g[0] * weight[k] * (-yk / pk + (1.0 - yk) / (1.0 - pk));
                }
            }
            Op::Custom(op) => {
                let pvals: Vec<&Tensor> = p.iter().map(|q| &nodes[q.0].value).collect();
                let grads = op.backward(g, &pvals, &node.value);
                for (&q, gq) in p.iter().zip(grads) {
                    if let (true, Some(gq)) = (needs(q), gq) {
                        for (d, v) in acc!(q).iter_mut().zip(&gq) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }

    fn lstm_backward(&self, node: &Node, cache: &[f64], g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let p = &node.parents;
        let val = |k: usize| &nodes[p[k].0].value;
        let (x, h_prev, c_prev, w_ih, w_hh) = (val(0), val(1), val(2), val(3), val(4));
        let h = h_prev.len();
        let (dh, dc) = g.split_at(h);
        let mut da = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let (i, f, gg, o, tc) = (
                cache[k],
                cache[h + k],
                cache[2 * h + k],
                cache[3 * h + k],
                cache[4 * h + k],
            );
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dct * gg * i * (1.0 - i);
            da[h + k] = dct * c_prev.data()[k] * f * (1.0 - f);
            da[2 * h + k] = dct * i * (1.0 - gg * gg);
            da[3 * h + k] = dh[k] * tc * o * (1.0 - o);
            dc_prev[k] = dct * f;
        }
        let mut add = |k: usize, f: &mut dyn FnMut(&mut [f64])| {
            let q = p[k];
            if nodes[q.0].requires_grad {
                let len = nodes[q.0].value.len();
                f(adj[q.0].get_or_insert_with(|| vec![0.0; len]));
            }
        };
        add(0, &mut |d| matvec_t_acc(w_ih.data(), w_ih.cols(), &da, d));
        add(1, &mut |d| matvec_t_acc(w_hh.data(), h, &da, d));
        add(2, &mut |d| d.iter_mut().zip(&dc_prev).for_each(|(a, b)| *a += b));
        add(3, &mut |d| outer_acc(&da, x.data(), d));
        add(4, &mut |d| outer_acc(&da, h_prev.data(), d));
        add(5, &mut |d| d.iter_mut().zip(&da).for_each(|(a, b)| *a += b));
    }

    /// Collect accumulated gradients of parameter leaves (and embedding lookups) into a [`Grads`].
    pub fn param_grads(&self, params: &ParamSet) -> Grads {
        let mut out = params.zeros_like();
        self.accumulate_param_grads(&mut out, 1.0);
        out
    }

    /// Add `scale ×` the parameter gradients held on this graph into `out`.
    pub fn accumulate_param_grads(&self, out: &mut Grads, scale: f64) {
        for node in &self.nodes {
            let Some(g) = &node.grad else { continue };
            match &node.op {
                Op::Param(id) => out.get_mut(*id).add_scaled(g, scale),
                Op::GatherMean { param, rows } => {
                    let t = out.get_mut(*param);
                    let cols = t.cols();
                    let s = scale / rows.len() as f64;
                    for &r in rows {
                        let dst = &mut t.data_mut()[r * cols..(r + 1) * cols];
                        for (d, v) in dst.iter_mut().zip(g.data()) {
                            *d += s * v;
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn affine_forward_examples() {
        let mut g = Graph::new();
        let w = g.constant(mat(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let x = g.constant(Tensor::vector(vec![1.0, 1.0]));
        let b = g.constant(Tensor::vector(vec![0.0, 1.0]));
        let y = g.affine(w, x, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 8.0]);

        let i = g.constant(mat(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let x = g.constant(Tensor::vector(vec![5.0, -2.0]));
        let z = g.constant(Tensor::vector(vec![0.0, 0.0]));
        let y = g.affine(i, x, Some(z)).unwrap();
        assert_eq!(g.value(y).data(), &[5.0, -2.0]);
    }

    #[test]
    fn affine_backward_matches_closed_form() {
        let mut ps = ParamSet::new();
        let wid = ps.push("w", mat(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let xid = ps.push("x", Tensor::vector(vec![1.0, 1.0]));
        let bid = ps.push("b", Tensor::vector(vec![0.0, 1.0]));
        let mut g = Graph::new();
        let (w, x, b) = (g.param(&ps, wid), g.param(&ps, xid), g.param(&ps, bid));
        let y = g.affine(w, x, Some(b)).unwrap();
        let sel = g.select(y, &[0]).unwrap();
        g.backward(sel);
        let grads = g.param_grads(&ps);
        assert_eq!(grads.get(xid).data(), &[1.0, 2.0]);
        assert_eq!(grads.get(wid).data(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(grads.get(bid).data(), &[1.0, 0.0]);
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let w = g.constant(Tensor::zeros(&[2, 3]));
        let x = g.constant(Tensor::vector(vec![1.0, 1.0]));
        let err = g.affine(w, x, None).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[2]"), "{err}");
    }

    #[test]
    fn sigmoid_and_tanh_examples() {
        let mut ps = ParamSet::new();
        let id = ps.push("x", Tensor::scalar(0.0));
        let mut g = Graph::new();
        let x = g.param(&ps, id);
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).item(), 0.5);
        g.backward(s);
        assert_eq!(g.param_grads(&ps).get(id).item(), 0.25);

        let mut g = Graph::new();
        let x = g.param(&ps, id);
        let t = g.tanh(x);
        assert_eq!(g.value(t).item(), 0.0);
        g.backward(t);
        assert_eq!(g.param_grads(&ps).get(id).item(), 1.0);

        let mut g = Graph::new();
        let big = g.constant(Tensor::scalar(100.0));
        let s = g.sigmoid(big);
        let t = g.tanh(big);
        assert!((g.value(s).item() - 1.0).abs() < 1e-12);
        assert!((g.value(t).item() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstm_zero_weights_give_zero_state() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![0.3, -1.2, 2.0]));
        let h = g.constant(Tensor::zeros(&[2]));
        let c = g.constant(Tensor::zeros(&[2]));
        let wi = g.constant(Tensor::zeros(&[8, 3]));
        let wh = g.constant(Tensor::zeros(&[8, 2]));
        let b = g.constant(Tensor::zeros(&[8]));
        let (hn, cn) = g.lstm_cell(x, h, c, wi, wh, b).unwrap();
        assert_eq!(g.value(hn).data(), &[0.0, 0.0]);
        assert_eq!(g.value(cn).data(), &[0.0, 0.0]);
    }

    #[test]
    fn lstm_saturated_forget_gate_carries_state() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![0.5]));
        let h = g.constant(Tensor::zeros(&[2]));
        let c = g.constant(Tensor::vector(vec![0.7, -0.4]));
        let wi = g.constant(Tensor::zeros(&[8, 1]));
        let wh = g.constant(Tensor::zeros(&[8, 2]));
        let mut bias = vec![0.0; 8];
        bias[2] = 100.0;
        bias[3] = 100.0;
        let b = g.constant(Tensor::vector(bias));
        let (_, cn) = g.lstm_cell(x, h, c, wi, wh, b).unwrap();
        assert_abs_diff_eq!(g.value(cn).data()[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(cn).data()[1], -0.4, epsilon = 1e-12);
    }

    #[test]
    fn bce_examples() {
        let mut g = Graph::new();
        let p = g.constant(Tensor::vector(vec![0.5]));
        let l = g.bce_loss(p, &[1.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(g.value(l).item(), std::f64::consts::LN_2, epsilon = 1e-12);

        let p = g.constant(Tensor::vector(vec![0.9, 0.9]));
        let l = g.bce_loss(p, &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g.value(l).item(), 0.105361, epsilon = 1e-6);

        let p = g.constant(Tensor::vector(vec![0.7]));
        let l = g.bce_loss(p, &[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(g.value(l).item(), 1.203973, epsilon = 1e-6);

        let p = g.constant(Tensor::vector(vec![0.7]));
        assert!(matches!(
            g.bce_loss(p, &[0.0], &[0.0]),
            Err(Error::NoValidSteps)
        ));
    }

    #[test]
    fn backward_twice_doubles_gradients() {
        let mut ps = ParamSet::new();
        let id = ps.push("x", Tensor::vector(vec![0.3, -0.8]));
        let mut g = Graph::new();
        let x = g.param(&ps, id);
        let t = g.tanh(x);
        let s = g.sigmoid(t);
        let m = g.mean(s);
        g.backward(m);
        let once = g.param_grads(&ps);
        g.backward(m);
        let twice = g.param_grads(&ps);
        for (a, b) in once.get(id).data().iter().zip(twice.get(id).data()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn ops_do_not_mutate_inputs() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::vector(vec![1.0, -2.0]));
        let before = g.value(a).clone();
        let s = g.sigmoid(a);
        let t = g.tanh(s);
        let d = g.dot(a, t).unwrap();
        g.backward(d);
        assert_eq!(g.value(a), &before);
    }

    #[test]
    fn gather_mean_scatters_gradient() {
        let mut ps = ParamSet::new();
        let id = ps.push("emb", mat(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let mut g = Graph::new();
        let e = g.gather_mean(&ps, id, &[0, 2]).unwrap();
        assert_eq!(g.value(e).data(), &[3.0, 4.0]);
        let s = g.select(e, &[1]).unwrap();
        g.backward(s);
        assert_eq!(
            g.param_grads(&ps).get(id).data(),
            &[0.0, 0.5, 0.0, 0.0, 0.0, 0.5]
        );
    }

    #[test]
    fn op_tags_and_parents_are_recorded() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::vector(vec![1.0]));
        let s = g.sigmoid(a);
        assert_eq!(g.op_name(s), "sigmoid");
        assert_eq!(g.parents(s), &[a]);
    }
}
