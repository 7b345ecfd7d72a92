//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbrkt_core::baselines::BktProbs;
use sbrkt_core::data::{EncodedSequence, EncodedStep, MultiHot};
use sbrkt_core::diff::{grad_check, Graph, ParamId, ParamSet, Tensor, Var};
use sbrkt_core::Result;

/// `P(y_i = 1 | y_<i)` by summing the joint over every latent mastery path.
pub fn brute_force_bkt(obs: &[u8], p: &BktProbs) -> Vec<f64> {
    let emit = |z: usize, y: u8| {
        let p1 = if z == 1 { 1.0 - p.s } else { p.g };
        if y == 1 {
            p1
        } else {
            1.0 - p1
        }
    };
    let trans = |from: usize, to: usize| match (from, to) {
        (1, 1) => 1.0 - p.f,
        (1, _) => p.f,
        (_, 1) => p.t,
        _ => 1.0 - p.t,
    };
    // joint probability of ys over all 2^len paths
    let joint = |ys: &[u8]| -> f64 {
        let n = ys.len();
        let mut total = 0.0;
        for path in 0..(1usize << n) {
            let z = |i: usize| (path >> i) & 1;
            let mut pr = if z(0) == 1 { p.l0 } else { 1.0 - p.l0 };
            for (i, &y) in ys.iter().enumerate() {
                if i > 0 {
                    pr *= trans(z(i - 1), z(i));
                }
                pr *= emit(z(i), y);
            }
            total += pr;
        }
        total
    };
    (0..obs.len())
        .map(|i| {
            let mut ys = obs[..i].to_vec();
            let prefix = if i == 0 { 1.0 } else { joint(&ys) };
            ys.push(1);
            joint(&ys) / prefix
        })
        .collect()
}

/// Quadratic pairwise AUC with half credit for ties, as one exact integer ratio.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut credit2: u128 = 0;
    let (mut np, mut nn) = (0u128, 0u128);
    for &l in labels {
        if l == 1 {
            np += 1;
        } else {
            nn += 1;
        }
    }
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            if scores[i] > scores[j] {
                credit2 += 2;
            } else if scores[i] == scores[j] {
                credit2 += 1;
            }
        }
    }
    credit2 as f64 / (2 * np * nn) as f64
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

type Builder = fn(&mut Graph, &ParamSet, &[ParamId], &mut ChaCha8Rng) -> Result<Var>;

/// One differentiable op under test: parameter shapes and a graph builder
/// returning the op's output.
pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub build: Builder,
}

fn p(g: &mut Graph, ps: &ParamSet, id: ParamId) -> Var {
    g.param(ps, id)
}

pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "affine",
            shapes: vec![vec![3, 4], vec![4], vec![3]],
            build: |g, ps, ids, _| {
                let (w, x, b) = (p(g, ps, ids[0]), p(g, ps, ids[1]), p(g, ps, ids[2]));
                g.affine(w, x, Some(b))
            },
        },
        OpCase {
            name: "affine_no_bias",
            shapes: vec![vec![2, 5], vec![5]],
            build: |g, ps, ids, _| {
                let (w, x) = (p(g, ps, ids[0]), p(g, ps, ids[1]));
                g.affine(w, x, None)
            },
        },
        OpCase {
            name: "sigmoid",
            shapes: vec![vec![5]],
            build: |g, ps, ids, _| {
                let x = p(g, ps, ids[0]);
                Ok(g.sigmoid(x))
            },
        },
        OpCase {
            name: "tanh",
            shapes: vec![vec![5]],
            build: |g, ps, ids, _| {
                let x = p(g, ps, ids[0]);
                Ok(g.tanh(x))
            },
        },
        OpCase {
            name: "add",
            shapes: vec![vec![4], vec![4]],
            build: |g, ps, ids, _| {
                let (a, b) = (p(g, ps, ids[0]), p(g, ps, ids[1]));
                g.add(a, b)
            },
        },
        OpCase {
            name: "mul",
            shapes: vec![vec![4], vec![4]],
            build: |g, ps, ids, _| {
                let (a, b) = (p(g, ps, ids[0]), p(g, ps, ids[1]));
                g.mul(a, b)
            },
        },
        OpCase {
            name: "concat",
            shapes: vec![vec![2], vec![3], vec![1]],
            build: |g, ps, ids, _| {
                let parts: Vec<Var> = ids.iter().map(|&id| p(g, ps, id)).collect();
                g.concat(&parts)
            },
        },
        OpCase {
            name: "attach_label",
            shapes: vec![vec![4]],
            build: |g, ps, ids, rng| {
                let u = p(g, ps, ids[0]);
                Ok(g.attach_label(u, u8::from(rng.random_bool(0.5))))
            },
        },
        OpCase {
            name: "dot",
            shapes: vec![vec![4], vec![4]],
            build: |g, ps, ids, _| {
                let (a, b) = (p(g, ps, ids[0]), p(g, ps, ids[1]));
                g.dot(a, b)
            },
        },
        OpCase {
            name: "select",
            shapes: vec![vec![6]],
            build: |g, ps, ids, rng| {
                let v = p(g, ps, ids[0]);
                let idx: Vec<usize> = (0..3).map(|_| rng.random_range(0..6)).collect();
                g.select(v, &idx)
            },
        },
        OpCase {
            name: "slice",
            shapes: vec![vec![6]],
            build: |g, ps, ids, rng| {
                let v = p(g, ps, ids[0]);
                let start = rng.random_range(0..5);
                let len = rng.random_range(1..=6 - start);
                g.slice(v, start, len)
            },
        },
        OpCase {
            name: "mean",
            shapes: vec![vec![5]],
            build: |g, ps, ids, _| {
                let v = p(g, ps, ids[0]);
                Ok(g.mean(v))
            },
        },
        OpCase {
            name: "gather_mean",
            shapes: vec![vec![5, 3]],
            build: |g, ps, ids, rng| {
                let n = rng.random_range(1..=4);
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
                g.gather_mean(ps, ids[0], &rows)
            },
        },
        OpCase {
            name: "lstm_cell",
            shapes: vec![vec![3], vec![2], vec![2], vec![8, 3], vec![8, 2], vec![8]],
            build: |g, ps, ids, _| {
                let v: Vec<Var> = ids.iter().map(|&id| p(g, ps, id)).collect();
                let (h, c) = g.lstm_cell(v[0], v[1], v[2], v[3], v[4], v[5])?;
                g.concat(&[h, c])
            },
        },
        OpCase {
            name: "bce_loss",
            shapes: vec![vec![5]],
            build: |g, ps, ids, rng| {
                let x = p(g, ps, ids[0]);
                let prob = g.sigmoid(x);
                let y: Vec<f64> = (0..5).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
                let mut mask: Vec<f64> = (0..5).map(|_| f64::from(u8::from(rng.random_bool(0.7)))).collect();
                mask[0] = 1.0;
                g.bce_loss(prob, &y, &mask)
            },
        },
    ]
}

/// Worst relative error of one op over `trials` random instances. The op's
/// output is reduced to a scalar by a dot product with fixed random weights.
pub fn check_op(case: &OpCase, trials: u64, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial * 7919));
        let mut ps = ParamSet::new();
        let ids: Vec<ParamId> = case
            .shapes
            .iter()
            .enumerate()
            .map(|(i, shape)| {
                let n = shape.iter().product();
                ps.push(format!("p{i}"), Tensor::new(shape.clone(), uniform_vec(&mut rng, n, 1.5)).unwrap())
            })
            .collect();
        let structure_seed: u64 = rng.random();
        let report = grad_check(&ps, 1e-6, 1e-4, None, |params| {
            let mut local = ChaCha8Rng::seed_from_u64(structure_seed);
            let mut g = Graph::new();
            let out = (case.build)(&mut g, params, &ids, &mut local)?;
            let n = g.value(out).len();
            let r = g.constant(Tensor::vector(uniform_vec(&mut local, n, 1.0)));
            let loss = g.dot(out, r)?;
            g.backward(loss);
            Ok((g.value(loss).item(), g.param_grads(params)))
        })
        .unwrap();
        assert!(report.passed(), "{} trial {trial}: {:?}", case.name, report.failures().next());
        worst = worst.max(report.max_rel_err);
    }
    worst
}

pub fn random_sequence(rng: &mut ChaCha8Rng, id: &str, len: usize, n_kcs: usize, n_q: usize) -> EncodedSequence {
    EncodedSequence {
        student_id: id.into(),
        steps: (0..len)
            .map(|_| {
                let k = rng.random_range(0..n_kcs);
                let extra = rng.random_range(0..n_kcs);
                EncodedStep {
                    q: rng.random_range(0..=n_q),
                    kcs: MultiHot::new(n_kcs, [k, extra]),
                    y: u8::from(rng.random_bool(0.5)),
                    skip: false,
                }
            })
            .collect(),
    }
}

pub fn random_probs(rng: &mut ChaCha8Rng) -> BktProbs {
    BktProbs::from_array([
        rng.random_range(0.01..0.99),
        rng.random_range(0.01..0.99),
        rng.random_range(0.01..0.99),
        rng.random_range(0.01..0.99),
        rng.random_range(0.01..0.99),
    ])
}
