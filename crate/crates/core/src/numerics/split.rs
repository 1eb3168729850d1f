use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{NumericsError, Result};
use crate::seed;

/// A train/test partition of `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// `(class, n_train, n_test)` in class order.
    pub per_class: Vec<(usize, usize, usize)>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Stratified train/test split with `ratio` of each class going to train.
///
/// Each class gets `floor(ratio * n_c)` train items; leftover slots needed to
/// bring the global train count to `round(ratio * n)` go to the classes with
/// the largest fractional remainders. A class with fewer than two members is
/// placed wholly in train and a warning is recorded.
pub fn stratified_split(class_of: &[usize], ratio: f64, seed: u64) -> SplitPlan {
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in class_of.iter().enumerate() {
        classes.entry(c).or_default().push(i);
    }

    let mut warnings = Vec::new();
    let mut alloc: Vec<(usize, usize, f64)> = Vec::new(); // (class, n_train, remainder)
    for (&c, members) in &classes {
        let n_c = members.len();
        if n_c < 2 {
            let msg = format!("class {c} has {n_c} item(s); placed entirely in train");
            log::warn!("{msg}");
            warnings.push(msg);
            alloc.push((c, n_c, -1.0));
            continue;
        }
        let exact = ratio * n_c as f64;
        let base = exact.floor() as usize;
        alloc.push((c, base, exact - base as f64));
    }

    let target = (ratio * class_of.len() as f64).round() as usize;
    let mut assigned: usize = alloc.iter().map(|a| a.1).sum();
    if assigned < target {
        let mut order: Vec<usize> = (0..alloc.len()).collect();
        order.sort_by(|&a, &b| alloc[b].2.total_cmp(&alloc[a].2).then(a.cmp(&b)));
        for k in order {
            if assigned >= target {
                break;
            }
            let n_c = classes[&alloc[k].0].len();
            if alloc[k].2 > 0.0 && alloc[k].1 < n_c {
                alloc[k].1 += 1;
                assigned += 1;
            }
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut per_class = Vec::new();
    for (c, n_train, _) in alloc {
        let mut members = classes[&c].clone();
        let mut rng = seed::derived_rng(seed, &["stratified_split", &c.to_string()]);
        members.shuffle(&mut rng);
        let (tr, te) = members.split_at(n_train);
        per_class.push((c, tr.len(), te.len()));
        train.extend_from_slice(tr);
        test.extend_from_slice(te);
    }
    train.sort_unstable();
    test.sort_unstable();
    SplitPlan { train, test, per_class, seed, warnings }
}

/// Partitions a seeded shuffle of `0..n` into `k` folds whose sizes differ by
/// at most one (the first `n % k` folds are the larger ones).
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n < k {
        return Err(NumericsError::TooFewSamples { needed: k.max(1), got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::derived_rng(seed, &["kfold"]));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}
