use crate::error::{Error, Result};

/// One scored binary outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredPrediction {
    pub score: f64,
    pub label: u8,
}

/// Mann-Whitney AUC via average ranks.
///
/// Ranks are kept doubled so tied groups stay integral; the result is one
/// division of exact integers and therefore equals the pairwise definition bit for bit.
pub fn auc(preds: &[ScoredPrediction]) -> Result<f64> {
    let mut n_pos: u128 = 0;
    for p in preds {
        if !p.score.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score {}", p.score)));
        }
        if p.label > 1 {
            return Err(Error::InvalidInput(format!("label {} is not binary", p.label)));
        }
        n_pos += u128::from(p.label);
    }
    let n = preds.len() as u128;
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].score.total_cmp(&preds[b].score));

    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && preds[order[j]].score == preds[order[i]].score {
            j += 1;
        }
        // ranks i+1..=j share the average (i+1+j)/2
        let twice_avg = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| preds[k].label == 1).count() as u128;
        twice_rank_sum += twice_avg * pos_in_group;
        i = j;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Convenience wrapper over parallel score/label slices.
pub fn auc_from(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            lhs: vec![scores.len()],
            rhs: vec![labels.len()],
            context: "auc scores vs labels",
        });
    }
    let preds: Vec<ScoredPrediction> = scores
        .iter()
        .zip(labels)
        .map(|(&score, &label)| ScoredPrediction { score, label })
        .collect();
    auc(&preds)
}
