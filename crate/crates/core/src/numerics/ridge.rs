use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::mean;
use super::{NumericsError, Result, DEGENERACY_EPS};

/// Penalty floor used for every regression unless a caller overrides it.
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Minimises `|y - Xw - b|^2 + lambda |w|^2` with an unpenalised intercept.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(NumericsError::LengthMismatch(n, y.len()));
    }
    if n == 0 {
        return Err(NumericsError::TooFewSamples { needed: 1, got: 0 });
    }
    let x_mean: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let y_mean = mean(y);
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let cxx = xc.tr_mul(&xc);
    let cxy = xc.tr_mul(&yc);
    debug_assert_eq!(cxx.shape(), (p, p));
    RidgeModel::from_centred_moments(&x_mean, y_mean, cxx, cxy.as_slice(), lambda)
}

impl RidgeModel {
    /// Solves the ridge normal equations given centred cross-products
    /// `sum (x - x_mean)(x - x_mean)^T` and `sum (x - x_mean)(y - y_mean)`.
    pub fn from_centred_moments(
        x_mean: &[f64],
        y_mean: f64,
        mut cxx: DMatrix<f64>,
        cxy: &[f64],
        lambda: f64,
    ) -> Result<RidgeModel> {
        let p = x_mean.len();
        for j in 0..p {
            cxx[(j, j)] += lambda;
        }
        let rhs = DVector::from_column_slice(cxy);
        let w = match cxx.clone().cholesky() {
            Some(ch) if lambda > 0.0 || well_conditioned(ch.l_dirty()) => ch.solve(&rhs),
            Some(_) => return Err(NumericsError::SingularSystem),
            None if lambda > 0.0 => cxx
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .map_err(|_| NumericsError::SingularSystem)?,
            None => return Err(NumericsError::SingularSystem),
        };
        if w.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::SingularSystem);
        }
        let intercept = y_mean - w.iter().zip(x_mean).map(|(a, b)| a * b).sum::<f64>();
        Ok(RidgeModel { weights: w.iter().copied().collect(), intercept })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(x.row(i).iter().copied())).collect()
    }

    pub fn predict_row(&self, row: impl IntoIterator<Item = f64>) -> f64 {
        self.intercept + row.into_iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()
    }
}

fn well_conditioned(l: &DMatrix<f64>) -> bool {
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    diag.iter().all(|&d| d > 1e-12 * max)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(NumericsError::LengthMismatch(y.len(), yhat.len()));
    }
    let m = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if ss_tot / (y.len() as f64) < DEGENERACY_EPS {
        return Err(NumericsError::ZeroVariance);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_by_normal_equations() {
        // x = 0,1,2 ; y = 1,3,5 -> w = 2, b = 1
        let x = DMatrix::from_column_slice(3, 1, &[0., 1., 2.]);
        let m = ridge_fit(&x, &[1., 3., 5.], 0.0).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-12);
        assert!((m.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_target_is_recovered_on_held_out_data() {
        let f = |a: f64, b: f64| 0.7 * a - 1.3 * b + 4.0;
        let train = DMatrix::from_fn(40, 2, |i, j| ((i * (j + 3)) % 11) as f64 - 5.0);
        let y: Vec<f64> = (0..40).map(|i| f(train[(i, 0)], train[(i, 1)])).collect();
        let m = ridge_fit(&train, &y, DEFAULT_RIDGE_LAMBDA).unwrap();
        let test = DMatrix::from_fn(15, 2, |i, j| (i as f64) * 0.37 - (j as f64) * 1.1);
        let yt: Vec<f64> = (0..15).map(|i| f(test[(i, 0)], test[(i, 1)])).collect();
        assert!(r2(&yt, &m.predict(&test)).unwrap() >= 1.0 - 1e-9);
    }

    #[test]
    fn constant_predictor_scores_zero() {
        let y = [1.0, 4.0, 2.0, 7.0];
        let m = mean(&y);
        assert!(r2(&y, &[m; 4]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn collinear_columns_need_the_floor() {
        let x = DMatrix::from_fn(10, 2, |i, _| i as f64);
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(ridge_fit(&x, &y, 0.0), Err(NumericsError::SingularSystem));
        let m = ridge_fit(&x, &y, DEFAULT_RIDGE_LAMBDA).unwrap();
        assert!(r2(&y, &m.predict(&x)).unwrap() > 1.0 - 1e-9);
    }
}
