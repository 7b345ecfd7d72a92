//! Synthetic interaction logs with known structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::CsvRow;
use crate::diff::sigmoid;

/// Small demo log: 20 students, 5 KCs, 15 questions, BKT-style learning.
pub fn toy_rows(seed: u64) -> Vec<CsvRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // questions 0..10 carry one KC, 10..15 carry two
    let q_kcs: Vec<Vec<usize>> = (0..15)
        .map(|q| if q < 10 { vec![q % 5] } else { vec![q % 5, (q + 1) % 5] })
        .collect();
    let mut rows = Vec::new();
    for s in 0..20 {
        let mut mastered: Vec<bool> = (0..5).map(|_| rng.random_bool(0.3)).collect();
        let len = rng.random_range(15..=30);
        for _ in 0..len {
            let q = rng.random_range(0..15);
            let kcs = &q_kcs[q];
            let all = kcs.iter().all(|&k| mastered[k]);
            let p = if all { 0.85 } else { 0.25 };
            let correct = u8::from(rng.random_bool(p));
            for &k in kcs {
                if !mastered[k] && rng.random_bool(0.15) {
                    mastered[k] = true;
                }
            }
            rows.push(CsvRow {
                student_id: format!("s{s:02}"),
                question_id: format!("q{q:02}"),
                kc_ids: kcs.iter().map(|k| format!("k{k}")).collect(),
                correct,
            });
        }
    }
    rows
}

/// Parameters of the visible/hidden KC generator.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenKcSpec {
    pub n_students: usize,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub n_questions: usize,
    pub seq_len: usize,
    /// Logit shift contributed by visible mastery.
    pub visible_effect: f64,
    /// Logit shift contributed by the hidden trait.
    pub hidden_effect: f64,
    pub seed: u64,
}

impl Default for HiddenKcSpec {
    fn default() -> Self {
        HiddenKcSpec {
            n_students: 2000,
            n_visible: 8,
            n_hidden: 8,
            n_questions: 64,
            seq_len: 100,
            visible_effect: 1.0,
            hidden_effect: 2.0,
            seed: 0,
        }
    }
}

/// Generated log plus the ground-truth Q-matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenKcData {
    pub rows: Vec<CsvRow>,
    /// Visible KC of each question (the only KC written to the log).
    pub visible: Vec<usize>,
    /// Hidden KC of each question.
    pub hidden: Vec<usize>,
}

/// Every question has one visible KC, which is logged, and one hidden KC, which is not.
///
/// Visible mastery follows BKT learning (`L0 = 0.3`, `T = 0.1`, no forgetting).
/// Each hidden KC is a static per-student trait present with probability 0.5.
/// `P(correct) = σ(b_q ± visible_effect ± hidden_effect)` with `b_q ~ N(0, 0.3²)`.
pub fn hidden_kc_dataset(spec: &HiddenKcSpec) -> HiddenKcData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let visible: Vec<usize> = (0..spec.n_questions).map(|q| q % spec.n_visible).collect();
    let hidden: Vec<usize> = (0..spec.n_questions)
        .map(|q| (q / spec.n_visible) % spec.n_hidden)
        .collect();
    let difficulty = Normal::new(0.0, 0.3).expect("valid normal");
    let b: Vec<f64> = (0..spec.n_questions).map(|_| difficulty.sample(&mut rng)).collect();
    let sign = |on: bool| if on { 1.0 } else { -1.0 };

    let mut rows = Vec::with_capacity(spec.n_students * spec.seq_len);
    for s in 0..spec.n_students {
        let mut mastery: Vec<bool> = (0..spec.n_visible).map(|_| rng.random_bool(0.3)).collect();
        let trait_on: Vec<bool> = (0..spec.n_hidden).map(|_| rng.random_bool(0.5)).collect();
        for _ in 0..spec.seq_len {
            let q = rng.random_range(0..spec.n_questions);
            let (v, h) = (visible[q], hidden[q]);
            let logit = b[q] + spec.visible_effect * sign(mastery[v]) + spec.hidden_effect * sign(trait_on[h]);
            let correct = u8::from(rng.random_bool(sigmoid(logit)));
            if !mastery[v] && rng.random_bool(0.1) {
                mastery[v] = true;
            }
            rows.push(CsvRow {
                student_id: format!("u{s:05}"),
                question_id: format!("q{q:03}"),
                kc_ids: vec![format!("v{v}")],
                correct,
            });
        }
    }
    HiddenKcData { rows, visible, hidden }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_shape() {
        let rows = toy_rows(0);
        let students: std::collections::BTreeSet<_> = rows.iter().map(|r| &r.student_id).collect();
        let questions: std::collections::BTreeSet<_> = rows.iter().map(|r| &r.question_id).collect();
        let kcs: std::collections::BTreeSet<_> = rows.iter().flat_map(|r| &r.kc_ids).collect();
        assert_eq!((students.len(), questions.len(), kcs.len()), (20, 15, 5));
        assert_eq!(toy_rows(0), rows);
    }

    #[test]
    fn hidden_generator_is_balanced() {
        let spec = HiddenKcSpec {
            n_students: 50,
            ..HiddenKcSpec::default()
        };
        let d = hidden_kc_dataset(&spec);
        assert_eq!(d.rows.len(), 50 * 100);
        for h in 0..8 {
            assert_eq!(d.hidden.iter().filter(|&&x| x == h).count(), 8);
        }
        let pairs: std::collections::BTreeSet<_> = d.visible.iter().zip(&d.hidden).collect();
        assert_eq!(pairs.len(), 64);
        assert!(d.rows.iter().all(|r| r.kc_ids.len() == 1));
    }
}
