use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{NumericsError, Result};

/// Principal axes of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// One unit-norm component per row, ordered by explained variance.
    pub components: Vec<Vec<f64>>,
    /// Nonincreasing, sums to one.
    pub explained_variance_ratio: Vec<f64>,
    /// Column means removed before decomposition.
    pub means: Vec<f64>,
}

/// PCA of the rows of `x` (N samples x P variables) via SVD of the centred
/// matrix.
///
/// Each component is oriented so that its largest-magnitude coordinate is
/// positive. At most `min(N, P)` components are returned.
pub fn pca(x: &DMatrix<f64>) -> Result<PcaResult> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(NumericsError::TooFewSamples { needed: 2, got: n });
    }
    if p == 0 {
        return Err(NumericsError::DegenerateInput("matrix has no columns"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let mut centred = x.clone();
    for (j, mut col) in centred.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    if centred.iter().all(|&v| v == 0.0) {
        return Err(NumericsError::DegenerateInput("all rows identical"));
    }

    let svd = centred.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(NumericsError::DegenerateInput("zero total variance"));
    }
    let mut components = Vec::with_capacity(order.len());
    let mut explained_variance_ratio = Vec::with_capacity(order.len());
    for &k in &order {
        let mut row: Vec<f64> = v_t.row(k).iter().copied().collect();
        orient(&mut row);
        components.push(row);
        explained_variance_ratio.push(sv[k] * sv[k] / total);
    }
    Ok(PcaResult { components, explained_variance_ratio, means })
}

fn orient(row: &mut [f64]) {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = i;
        }
    }
    if row[best] < 0.0 {
        row.iter_mut().for_each(|v| *v = -*v);
    }
}

impl PcaResult {
    /// Scores of the rows of `x` on the first `k` components (N x k).
    pub fn transform(&self, x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
        let k = k.min(self.components.len());
        let (n, p) = x.shape();
        let mut out = DMatrix::zeros(n, k);
        for c in 0..k {
            let comp = DVector::from_column_slice(&self.components[c]);
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..p {
                    acc += (x[(i, j)] - self.means[j]) * comp[j];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// Maps scores back to the original coordinates.
    pub fn inverse_transform(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, k) = scores.shape();
        let p = self.means.len();
        let mut out = DMatrix::from_fn(n, p, |_, j| self.means[j]);
        for c in 0..k {
            for i in 0..n {
                let s = scores[(i, c)];
                for j in 0..p {
                    out[(i, j)] += s * self.components[c][j];
                }
            }
        }
        out
    }
}

/// Smallest `k` whose leading ratios reach `threshold` cumulatively.
///
/// A tiny slack absorbs rounding in ratios that sum to one.
pub fn components_for_variance(ratios: &[f64], threshold: f64) -> usize {
    let mut cum = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cum += r;
        if cum >= threshold - 1e-12 {
            return i + 1;
        }
    }
    ratios.len()
}
