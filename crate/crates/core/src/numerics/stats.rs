use super::{NumericsError, Result, DEGENERACY_EPS};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Variance with divisor `n`.
pub fn population_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn population_std(x: &[f64]) -> f64 {
    population_variance(x).sqrt()
}

/// Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(NumericsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(NumericsError::TooFewSamples { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let n = x.len() as f64;
    if sxx / n < DEGENERACY_EPS || syy / n < DEGENERACY_EPS {
        return Err(NumericsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(NumericsError::LengthMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let (nu, nv) = (nu.sqrt(), nv.sqrt());
    if nu < DEGENERACY_EPS || nv < DEGENERACY_EPS {
        return Err(NumericsError::ZeroNorm);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-15);
        // cov = 1.25, var = 1.25 each side -> 4/5
        assert!((pearson(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_constant() {
        assert_eq!(pearson(&[1., 1., 1.], &[1., 2., 3.]), Err(NumericsError::ZeroVariance));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1., 0.], &[0., 1.]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1., 1.], &[2., 2.]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&[1., 2.], &[2., 1.]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0., 0.], &[1., 1.]), Err(NumericsError::ZeroNorm));
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1e3f64..1e3, n),
                proptest::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric((x, y) in vec_pair()) {
            if let Ok(r) = pearson(&x, &y) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
                prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-12);
                let shifted: Vec<f64> = x.iter().map(|v| 3.0 * v + 5.0).collect();
                prop_assert!((r - pearson(&shifted, &y).unwrap()).abs() < 1e-9);
            }
            if let Ok(c) = cosine_similarity(&x, &y) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
                let scaled: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
                prop_assert!((c - cosine_similarity(&scaled, &y).unwrap()).abs() < 1e-12);
            }
        }
    }
}
