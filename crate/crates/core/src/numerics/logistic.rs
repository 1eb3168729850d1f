//! L2-penalised binary logistic regression fitted by damped Newton.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{NumericsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// Penalty on `|w|^2 / 2`; the intercept is not penalised.
    pub l2: f64,
    /// Convergence threshold on the Euclidean norm of the gradient.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { l2: 1e-4, tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

impl LogisticModel {
    /// Linear score `x . w + b` for each row.
    pub fn decision_function(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let w = DVector::from_column_slice(&self.weights);
        (x * w).iter().map(|z| z + self.intercept).collect()
    }

    /// Positive-class probability for each row.
    pub fn predict_score(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.decision_function(x).into_iter().map(sigmoid).collect()
    }

    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(NumericsError::NonConvergence { iterations: self.iterations, grad_norm: self.grad_norm })
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Penalised negative log-likelihood and its gradient at `(weights, intercept)`.
///
/// The gradient is laid out as `[dw..., db]`.
pub fn logistic_objective(
    x: &DMatrix<f64>,
    labels: &[bool],
    l2: f64,
    weights: &[f64],
    intercept: f64,
) -> (f64, Vec<f64>) {
    let p = x.ncols();
    let w = DVector::from_column_slice(weights);
    let z = x * &w;
    let mut value = 0.5 * l2 * w.norm_squared();
    let mut resid = DVector::zeros(x.nrows());
    for i in 0..x.nrows() {
        let zi = z[i] + intercept;
        let yi = if labels[i] { 1.0 } else { 0.0 };
        value += softplus(zi) - yi * zi;
        resid[i] = sigmoid(zi) - yi;
    }
    let gw = x.tr_mul(&resid) + &w * l2;
    let mut grad = Vec::with_capacity(p + 1);
    grad.extend(gw.iter());
    grad.push(resid.sum());
    (value, grad)
}

/// Fits the probe. Non-convergence is reported on the model, not as an
/// error, so a long suite can record it and continue.
pub fn logistic_fit(x: &DMatrix<f64>, labels: &[bool], opts: LogisticOptions) -> Result<LogisticModel> {
    let (n, p) = x.shape();
    if labels.len() != n {
        return Err(NumericsError::LengthMismatch(n, labels.len()));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(NumericsError::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    // With more columns than rows the optimum lies in the row space of `x`;
    // an orthonormal basis of that space gives an equivalent smaller problem.
    if p > n {
        if let Some((z, basis)) = row_space(x) {
            let reduced = newton(&z, labels, opts);
            let weights = (&basis * DVector::from_column_slice(&reduced.weights)).iter().copied().collect();
            return Ok(LogisticModel { weights, ..reduced });
        }
    }
    Ok(newton(x, labels, opts))
}

/// Returns `(X V, V)` where the columns of `V` are an orthonormal basis of
/// the row space of `x`.
fn row_space(x: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let gram = x * x.transpose();
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return None;
    }
    let mut keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 1e-12 * max).collect();
    keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let n = x.nrows();
    let r = keep.len();
    let mut u = DMatrix::zeros(n, r);
    let mut inv_sqrt = Vec::with_capacity(r);
    for (c, &k) in keep.iter().enumerate() {
        u.set_column(c, &eig.eigenvectors.column(k));
        inv_sqrt.push(1.0 / eig.eigenvalues[k].sqrt());
    }
    let mut basis = x.transpose() * &u;
    for (c, s) in inv_sqrt.iter().enumerate() {
        basis.column_mut(c).scale_mut(*s);
    }
    let z = x * &basis;
    Some((z, basis))
}

fn newton(x: &DMatrix<f64>, labels: &[bool], opts: LogisticOptions) -> LogisticModel {
    let (n, p) = x.shape();
    // explicit transpose: the blocked product is much faster than `tr_mul`
    let xt = x.transpose();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let (mut f, mut g) = logistic_objective(x, labels, opts.l2, &w, b);
    let mut iterations = 0;
    loop {
        let gnorm = norm(&g);
        if gnorm < opts.tol {
            return LogisticModel { weights: w, intercept: b, iterations, grad_norm: gnorm, converged: true };
        }
        if iterations >= opts.max_iter {
            return LogisticModel { weights: w, intercept: b, iterations, grad_norm: gnorm, converged: false };
        }
        iterations += 1;

        // Hessian of the augmented system [w; b]
        let wv = DVector::from_column_slice(&w);
        let z = x * &wv;
        let s: Vec<f64> = (0..n).map(|i| {
            let q = sigmoid(z[i] + b);
            q * (1.0 - q)
        }).collect();
        let mut h = DMatrix::zeros(p + 1, p + 1);
        let mut sx = x.clone();
        for (i, si) in s.iter().enumerate() {
            sx.row_mut(i).scale_mut(*si);
        }
        h.view_mut((0, 0), (p, p)).copy_from(&(&xt * &sx));
        for j in 0..p {
            h[(j, j)] += opts.l2;
            let c: f64 = sx.column(j).sum();
            h[(j, p)] = c;
            h[(p, j)] = c;
        }
        h[(p, p)] = s.iter().sum();

        let grad = DVector::from_column_slice(&g);
        let step = solve_spd(h, &grad).map(|d| -d);
        let step = match step {
            Some(d) => d,
            None => -grad.clone(),
        };
        let slope = grad.dot(&step);

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new: Vec<f64> = w.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let b_new = b + t * step[p];
            let (f_new, g_new) = logistic_objective(x, labels, opts.l2, &w_new, b_new);
            // near the optimum the decrease drops below the rounding of `f`;
            // fall back to requiring a smaller gradient
            let at_noise_floor = (f_new - f).abs() <= 16.0 * f64::EPSILON * f.abs().max(1.0)
                && norm(&g_new) < norm(&g);
            if f_new <= f + 1e-4 * t * slope || at_noise_floor {
                w = w_new;
                b = b_new;
                f = f_new;
                g = g_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let gnorm = norm(&g);
            return LogisticModel { weights: w, intercept: b, iterations, grad_norm: gnorm, converged: gnorm < opts.tol };
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve_spd(mut h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..8 {
        if let Some(ch) = h.clone().cholesky() {
            let d = ch.solve(rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        let add = if jitter == 0.0 { 1e-12 * scale } else { jitter * 9.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += add;
        }
        jitter += add;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::auc_roc;
    use proptest::prelude::*;

    #[test]
    fn separated_classes_rank_perfectly() {
        let x = DMatrix::from_column_slice(6, 1, &[-3., -2., -1., 1., 2., 3.]);
        let y = [false, false, false, true, true, true];
        let m = logistic_fit(&x, &y, LogisticOptions::default()).unwrap();
        assert!(m.converged, "{m:?}");
        assert_eq!(auc_roc(&m.predict_score(&x), &y).unwrap(), 1.0);
    }

    #[test]
    fn identical_points_both_labels_give_half() {
        let pts = [0.3, -1.2, 2.0, 0.7];
        let x = DMatrix::from_fn(8, 1, |i, _| pts[i % 4]);
        let y: Vec<bool> = (0..8).map(|i| i >= 4).collect();
        let m = logistic_fit(&x, &y, LogisticOptions::default()).unwrap();
        for s in m.predict_score(&x) {
            assert!((s - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = DMatrix::from_column_slice(2, 1, &[1., 2.]);
        assert_eq!(logistic_fit(&x, &[true, true], LogisticOptions::default()), Err(NumericsError::SingleClass));
    }

    #[test]
    fn matches_grid_search_on_shifted_means() {
        // overlapping 1-D classes centred at -0.5 and +0.5
        let neg = [-1.9, -1.1, -0.6, -0.2, 0.1, 0.4];
        let pos = [-0.3, 0.2, 0.5, 0.9, 1.3, 2.1];
        let xs: Vec<f64> = neg.iter().chain(&pos).copied().collect();
        let y: Vec<bool> = (0..12).map(|i| i >= 6).collect();
        let x = DMatrix::from_column_slice(12, 1, &xs);
        let m = logistic_fit(&x, &y, LogisticOptions::default()).unwrap();

        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=600 {
            let w = -3.0 + i as f64 * 0.01;
            for j in 0..=200 {
                let b = -1.0 + j as f64 * 0.01;
                let (f, _) = logistic_objective(&x, &y, 1e-4, &[w], b);
                if f < best.0 {
                    best = (f, w, b);
                }
            }
        }
        assert!(m.weights[0] > 0.0);
        assert!((m.weights[0] - best.1).abs() < 0.02, "newton {} grid {}", m.weights[0], best.1);
        let (f_opt, _) = logistic_objective(&x, &y, 1e-4, &m.weights, m.intercept);
        assert!(f_opt <= best.0 + 1e-12);
    }

    #[test]
    fn wide_problem_matches_primal_optimum() {
        let x = DMatrix::from_fn(8, 20, |i, j| (((i * 31 + j * 17) % 13) as f64 - 6.0) / 6.0);
        let y: Vec<bool> = (0..8).map(|i| i % 3 == 0).collect();
        let m = logistic_fit(&x, &y, LogisticOptions::default()).unwrap();
        let (_, g) = logistic_objective(&x, &y, 1e-4, &m.weights, m.intercept);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(gn < 1e-6, "gradient norm {gn}");
    }

    fn instance() -> impl Strategy<Value = (DMatrix<f64>, Vec<bool>, Vec<f64>, f64)> {
        (4usize..30, 1usize..5).prop_flat_map(|(n, p)| {
            (
                proptest::collection::vec(-2.0f64..2.0, n * p).prop_map(move |v| DMatrix::from_row_slice(n, p, &v)),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(-1.5f64..1.5, p),
                -1.0f64..1.0,
            )
        })
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences((x, y, w, b) in instance()) {
            let l2 = 0.3;
            let (_, g) = logistic_objective(&x, &y, l2, &w, b);
            let h = 1e-6;
            for k in 0..=w.len() {
                let (mut wp, mut wm, mut bp, mut bm) = (w.clone(), w.clone(), b, b);
                if k < w.len() { wp[k] += h; wm[k] -= h; } else { bp += h; bm -= h; }
                let fd = (logistic_objective(&x, &y, l2, &wp, bp).0 - logistic_objective(&x, &y, l2, &wm, bm).0) / (2.0 * h);
                let rel = (fd - g[k]).abs() / g[k].abs().max(1.0);
                prop_assert!(rel < 1e-5, "component {}: fd {} analytic {}", k, fd, g[k]);
            }
        }

        #[test]
        fn optimum_has_small_gradient((x, y, _, _) in instance()) {
            prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
            let m = logistic_fit(&x, &y, LogisticOptions::default()).unwrap();
            let (_, g) = logistic_objective(&x, &y, 1e-4, &m.weights, m.intercept);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(m.converged, "{:?}", m);
            prop_assert!(gn < 1e-6);
        }
    }
}
