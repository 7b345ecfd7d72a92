use std::collections::BTreeSet;

use super::records::InteractionLog;
use super::vocab::Vocab;

/// Binary vector of length `len`, stored as its sorted set bits.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MultiHot {
    len: usize,
    active: Vec<usize>,
}

impl MultiHot {
    pub fn new(len: usize, active: impl IntoIterator<Item = usize>) -> Self {
        let active: BTreeSet<usize> = active.into_iter().collect();
        assert!(active.iter().all(|&i| i < len), "multi-hot index out of range");
        MultiHot {
            len,
            active: active.into_iter().collect(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        MultiHot {
            len,
            active: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn popcount(&self) -> usize {
        self.active.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        for &i in &self.active {
            v[i] = 1.0;
        }
        v
    }
}

/// Result of encoding one KC set against a vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedKcs {
    pub multihot: MultiHot,
    /// Ids not present in the vocabulary.
    pub unknown: usize,
    /// Set when no id was known; such steps are excluded from loss and metrics.
    pub skip: bool,
}

pub fn encode_multihot<'a>(kc_ids: impl IntoIterator<Item = &'a String>, vocab: &Vocab) -> EncodedKcs {
    let mut unknown = 0;
    let mut active = Vec::new();
    for id in kc_ids {
        match vocab.kc(id) {
            Some(i) => active.push(i),
            None => unknown += 1,
        }
    }
    let multihot = MultiHot::new(vocab.num_kcs(), active);
    let skip = multihot.popcount() == 0;
    EncodedKcs {
        multihot,
        unknown,
        skip,
    }
}

/// `(u·y) ⊕ (u·(1−y))`: the first half carries `u` for a correct response, the second half for an incorrect one.
pub fn attach_label(u: &[f64], y: u8) -> Vec<f64> {
    let l = u.len();
    let mut out = vec![0.0; 2 * l];
    let offset = if y == 1 { 0 } else { l };
    out[offset..offset + l].copy_from_slice(u);
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedStep {
    /// Question index; `vocab.num_questions()` marks a question unseen in training.
    pub q: usize,
    pub kcs: MultiHot,
    pub y: u8,
    pub skip: bool,
}

impl EncodedStep {
    pub fn padding(n_kcs: usize) -> Self {
        EncodedStep {
            q: 0,
            kcs: MultiHot::zeros(n_kcs),
            y: 0,
            skip: true,
        }
    }

    pub fn scored(&self) -> bool {
        !self.skip
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSequence {
    pub student_id: String,
    pub steps: Vec<EncodedStep>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncodeStats {
    pub unknown_kcs: usize,
    pub skipped_steps: usize,
    pub unseen_questions: usize,
}

pub fn encode_log(log: &InteractionLog, vocab: &Vocab) -> (Vec<EncodedSequence>, EncodeStats) {
    let mut stats = EncodeStats::default();
    let seqs = log
        .students
        .iter()
        .map(|s| EncodedSequence {
            student_id: s.student_id.clone(),
            steps: s
                .records
                .iter()
                .map(|r| {
                    let enc = encode_multihot(&r.kc_ids, vocab);
                    stats.unknown_kcs += enc.unknown;
                    stats.skipped_steps += usize::from(enc.skip);
                    let q = vocab.question(&r.question_id).unwrap_or_else(|| {
                        stats.unseen_questions += 1;
                        vocab.num_questions()
                    });
                    EncodedStep {
                        q,
                        kcs: enc.multihot,
                        y: r.correct,
                        skip: enc.skip,
                    }
                })
                .collect(),
        })
        .collect();
    (seqs, stats)
}
