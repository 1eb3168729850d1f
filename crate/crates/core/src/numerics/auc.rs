use super::{NumericsError, Result};

/// Area under the ROC curve as the normalised Mann-Whitney U statistic.
///
/// Labels are `true` for the positive class. Tied scores earn half credit.
/// Sorting makes this `O(n log n)`; every intermediate is a multiple of 0.5,
/// so the result is bit-identical to the pairwise count.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(NumericsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(NumericsError::NonFinite);
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(NumericsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled so
    // it stays an integer.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j average to (i+1+j)/2
        let twice_avg = (i + 1 + j) as u64;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        twice_rank_sum += twice_avg * pos_in_group;
        i = j;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok((twice_u as f64 / 2.0) / (p as f64 * q as f64))
}
