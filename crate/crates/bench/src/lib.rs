//! Deterministic inputs for the kernel benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbrkt_core::data::{EncodedSequence, EncodedStep, MultiHot};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores rounded to three decimals (so ties occur) with Bernoulli(0.4) labels.
pub fn scored(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut r = rng(seed);
    let scores = (0..n).map(|_| (r.random::<f64>() * 1000.0).round() / 1000.0).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.random_bool(0.4))).collect();
    labels[0] = 0;
    labels[n - 1] = 1;
    (scores, labels)
}

pub fn uniform(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn sequence(len: usize, n_kcs: usize, n_questions: usize, seed: u64) -> EncodedSequence {
    let mut r = rng(seed);
    EncodedSequence {
        student_id: "bench".into(),
        steps: (0..len)
            .map(|_| EncodedStep {
                q: r.random_range(0..n_questions),
                kcs: MultiHot::new(n_kcs, [r.random_range(0..n_kcs)]),
                y: u8::from(r.random_bool(0.6)),
                skip: false,
            })
            .collect(),
    }
}
