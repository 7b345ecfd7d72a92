use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::records::InteractionLog;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: InteractionLog,
    pub val: InteractionLog,
    pub test: InteractionLog,
}

/// Student counts for `(train, val, test)`: val and test get `max(1, ⌊n·r⌋)`, the remainder goes to train.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("split ratios {ratios:?} must sum to 1")));
    }
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 students to split, got {n}"
        )));
    }
    let val = ((n as f64 * b).floor() as usize).max(1);
    let test = ((n as f64 * c).floor() as usize).max(1);
    Ok((n - val - test, val, test))
}

/// Partition students (never interactions) into train/val/test, deterministic under `seed`.
pub fn split_students(log: &InteractionLog, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let n = log.students.len();
    let (n_train, n_val, _) = split_sizes(n, ratios)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        InteractionLog {
            students: idx.iter().map(|&i| log.students[i].clone()).collect(),
            dropped_rows: 0,
        }
    };
    Ok(Split {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{InteractionRecord, StudentHistory};
    use std::collections::BTreeSet;

    fn students(n: usize) -> InteractionLog {
        InteractionLog {
            students: (0..n)
                .map(|i| StudentHistory {
                    student_id: format!("s{i}"),
                    records: vec![InteractionRecord {
                        student_id: format!("s{i}"),
                        question_id: "q".into(),
                        kc_ids: BTreeSet::from(["k".to_string()]),
                        correct: 1,
                        order_key: 0,
                    }],
                })
                .collect(),
            dropped_rows: 0,
        }
    }

    fn ids(l: &InteractionLog) -> Vec<String> {
        l.students.iter().map(|s| s.student_id.clone()).collect()
    }

    #[test]
    fn ten_students() {
        let s = split_students(&students(10), DEFAULT_RATIOS, 1).unwrap();
        assert_eq!(
            (s.train.students.len(), s.val.students.len(), s.test.students.len()),
            (8, 1, 1)
        );
    }

    #[test]
    fn three_students() {
        assert_eq!(split_sizes(3, DEFAULT_RATIOS).unwrap(), (1, 1, 1));
    }

    #[test]
    fn too_few_students() {
        assert!(split_students(&students(2), DEFAULT_RATIOS, 0).is_err());
    }

    #[test]
    fn deterministic_and_partitioning() {
        let log = students(57);
        let a = split_students(&log, DEFAULT_RATIOS, 9).unwrap();
        let b = split_students(&log, DEFAULT_RATIOS, 9).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<String> = [&a.train, &a.val, &a.test].iter().flat_map(|l| ids(l)).collect();
        all.sort();
        let mut expected = ids(&log);
        expected.sort();
        assert_eq!(all, expected);
    }
}
