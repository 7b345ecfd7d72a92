use super::encode::{EncodedSequence, EncodedStep};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_LEN: usize = 200;
pub const MIN_WINDOW: usize = 2;

/// Padded grid of windows; `mask[r][t] == 1` on real steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub steps: Vec<Vec<EncodedStep>>,
    pub mask: Vec<Vec<u8>>,
}

impl Batch {
    pub fn from_windows(windows: &[EncodedSequence]) -> Self {
        let width = windows.iter().map(|w| w.steps.len()).max().unwrap_or(0);
        let n_kcs = windows
            .iter()
            .flat_map(|w| w.steps.first())
            .map(|s| s.kcs.len())
            .next()
            .unwrap_or(0);
        let mut steps = Vec::with_capacity(windows.len());
        let mut mask = Vec::with_capacity(windows.len());
        for w in windows {
            let mut row = w.steps.clone();
            let mut m = vec![1u8; row.len()];
            row.resize(width, EncodedStep::padding(n_kcs));
            m.resize(width, 0);
            steps.push(row);
            mask.push(m);
        }
        Batch { steps, mask }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Valid prefix of every row.
    pub fn rows(&self) -> impl Iterator<Item = &[EncodedStep]> {
        self.steps.iter().zip(&self.mask).map(|(row, m)| {
            let n = m.iter().take_while(|&&v| v == 1).count();
            &row[..n]
        })
    }

    /// Number of steps that count towards loss and metrics.
    pub fn scored_steps(&self) -> usize {
        self.rows().flat_map(|r| r.iter()).filter(|s| s.scored()).count()
    }
}

/// Chunk every sequence into consecutive windows of at most `max_len`, dropping windows shorter than two steps.
pub fn window_sequences(seqs: &[EncodedSequence], max_len: usize) -> Result<Vec<EncodedSequence>> {
    if max_len < MIN_WINDOW {
        return Err(Error::InvalidInput(format!("max_len must be ≥ {MIN_WINDOW}, got {max_len}")));
    }
    Ok(seqs
        .iter()
        .flat_map(|s| {
            s.steps
                .chunks(max_len)
                .filter(|c| c.len() >= MIN_WINDOW)
                .map(|c| EncodedSequence {
                    student_id: s.student_id.clone(),
                    steps: c.to_vec(),
                })
        })
        .collect())
}

pub fn batch_windows(windows: &[EncodedSequence], batch_size: usize) -> Vec<Batch> {
    assert!(batch_size > 0, "batch size must be positive");
    windows.chunks(batch_size).map(Batch::from_windows).collect()
}

pub fn batch_sequences(seqs: &[EncodedSequence], max_len: usize, batch_size: usize) -> Result<Vec<Batch>> {
    Ok(batch_windows(&window_sequences(seqs, max_len)?, batch_size))
}
