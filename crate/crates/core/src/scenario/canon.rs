//! Canonical form: fixed length on a uniform grid, z-scored.

use serde::{Deserialize, Serialize};

use super::{CellKey, Dataset, ExcludedCell, ForgeError, Result, SignalRecord};
use crate::numerics::{mean, population_variance, DEGENERACY_EPS};

/// Linear interpolation of `(times, values)` onto `target_len` uniformly
/// spaced points spanning `[times[0], times[last]]`. Endpoints are copied.
pub(crate) fn interpolate_uniform(times: &[f64], values: &[f64], target_len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = times.len();
    let (t0, t1) = (times[0], times[n - 1]);
    let step = (t1 - t0) / (target_len - 1) as f64;
    let mut grid = Vec::with_capacity(target_len);
    let mut out = Vec::with_capacity(target_len);
    let mut seg = 0;
    for j in 0..target_len {
        let t = if j + 1 == target_len { t1 } else { t0 + j as f64 * step };
        grid.push(t);
        if j == 0 {
            out.push(values[0]);
            continue;
        }
        if j + 1 == target_len {
            out.push(values[n - 1]);
            continue;
        }
        while seg + 2 < n && times[seg + 1] <= t {
            seg += 1;
        }
        let (ta, tb) = (times[seg], times[seg + 1]);
        let frac = (t - ta) / (tb - ta);
        out.push(values[seg] + frac * (values[seg + 1] - values[seg]));
    }
    (grid, out)
}

fn is_uniform(times: &[f64]) -> bool {
    let n = times.len();
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    let tol = 1e-12 * step.abs().max(times[0].abs()).max(times[n - 1].abs());
    times.iter().enumerate().all(|(i, t)| (t - (times[0] + i as f64 * step)).abs() <= tol)
}

/// Resamples `record` to `target_len` points by linear interpolation.
///
/// A record that already has `target_len` uniformly spaced samples is
/// returned unchanged.
pub fn resample_linear(record: &SignalRecord, target_len: usize) -> Result<SignalRecord> {
    if record.len() < 2 {
        return Err(ForgeError::TooShort { len: record.len() });
    }
    if target_len < 2 {
        return Err(ForgeError::TooShort { len: target_len });
    }
    if record.len() == target_len && is_uniform(&record.times) {
        return Ok(record.clone());
    }
    let (times, values) = interpolate_uniform(&record.times, &record.values, target_len);
    Ok(SignalRecord { times, values, ..record.clone() })
}

/// Zero mean, unit population variance.
pub fn normalize_zscore(record: &SignalRecord) -> Result<SignalRecord> {
    let var = population_variance(&record.values);
    if !(var >= DEGENERACY_EPS) {
        return Err(ForgeError::ConstantSignal { cell: Some(record.key()) });
    }
    let (m, sd) = (mean(&record.values), var.sqrt());
    let values = record.values.iter().map(|v| (v - m) / sd).collect();
    Ok(SignalRecord { values, ..record.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each (scenario, patient, feature) series separately.
    #[default]
    PerCell,
    /// One mean/sd per (scenario, feature), pooled over patients.
    PerScenarioPooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    #[default]
    ResampleThenNormalize,
    NormalizeThenResample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CanonicalOptions {
    /// Overrides the manifest's `canonical_length` when set.
    pub length: Option<usize>,
    pub normalization: Normalization,
    pub order: StageOrder,
}

/// Brings every record to canonical form. Constant cells are moved to
/// `excluded` instead of being zero-filled.
pub fn canonicalize(ds: &Dataset, opts: &CanonicalOptions) -> Result<Dataset> {
    let len = opts.length.unwrap_or(ds.manifest.canonical_length);
    let mut excluded = ds.excluded.clone();
    let mut out = Vec::with_capacity(ds.len());

    let exclude = |excluded: &mut Vec<ExcludedCell>, cell: CellKey| {
        log::warn!("excluding constant cell {cell}");
        excluded.push(ExcludedCell { cell, reason: "constant signal".into() });
    };

    match opts.normalization {
        Normalization::PerCell => {
            for r in ds.records() {
                let res = match opts.order {
                    StageOrder::ResampleThenNormalize => resample_linear(r, len).and_then(|r| normalize_zscore(&r)),
                    StageOrder::NormalizeThenResample => normalize_zscore(r).and_then(|r| resample_linear(&r, len)),
                };
                match res {
                    Ok(r) => out.push(r),
                    Err(ForgeError::ConstantSignal { .. }) => exclude(&mut excluded, r.key()),
                    Err(e) => return Err(e),
                }
            }
        }
        Normalization::PerScenarioPooled => {
            for s in &ds.manifest.scenarios {
                for &f in &ds.manifest.features {
                    let group: Vec<&SignalRecord> = ds
                        .manifest
                        .patients
                        .iter()
                        .filter_map(|p| ds.get(s, &p.id, f))
                        .collect();
                    let group: Vec<SignalRecord> = match opts.order {
                        StageOrder::ResampleThenNormalize => {
                            let rs = group.iter().map(|r| resample_linear(r, len)).collect::<Result<Vec<_>>>()?;
                            pooled_zscore(rs)
                        }
                        StageOrder::NormalizeThenResample => pooled_zscore(group.into_iter().cloned().collect())
                            .into_iter()
                            .map(|r| resample_linear(&r, len))
                            .collect::<Result<Vec<_>>>()?,
                    };
                    out.extend(group.into_iter().filter(|r| {
                        let keep = population_variance(&r.values) >= DEGENERACY_EPS;
                        if !keep {
                            exclude(&mut excluded, r.key());
                        }
                        keep
                    }));
                }
            }
        }
    }
    let mut manifest = ds.manifest.clone();
    manifest.canonical_length = len;
    Dataset::new(manifest, out, excluded)
}

fn pooled_zscore(mut rs: Vec<SignalRecord>) -> Vec<SignalRecord> {
    let all: Vec<f64> = rs.iter().flat_map(|r| r.values.iter().copied()).collect();
    if all.is_empty() {
        return rs;
    }
    let var = population_variance(&all);
    if var < DEGENERACY_EPS {
        return rs;
    }
    let (m, sd) = (mean(&all), var.sqrt());
    for r in &mut rs {
        r.values.iter_mut().for_each(|v| *v = (*v - m) / sd);
    }
    rs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_dataset, FeatureId, GeneratorConfig};
    use proptest::prelude::*;

    fn rec(times: Vec<f64>, values: Vec<f64>) -> SignalRecord {
        SignalRecord { scenario: "s".into(), patient: "p".into(), feature: FeatureId::HeartRate, times, values }
    }

    #[test]
    fn two_points_to_three() {
        let r = resample_linear(&rec(vec![0., 1.], vec![0., 1.]), 3).unwrap();
        assert_eq!(r.values, vec![0.0, 0.5, 1.0]);
        assert_eq!(r.times, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn identity_when_already_canonical() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = (0..50).map(|i| ((i * 7) % 5) as f64).collect();
        let r = rec(times, values.clone());
        assert_eq!(resample_linear(&r, 50).unwrap().values, values);
    }

    #[test]
    fn ramp_stays_exact_when_downsampled() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 * t - 2.0).collect();
        let r = resample_linear(&rec(times, values), 10).unwrap();
        for (t, v) in r.times.iter().zip(&r.values) {
            assert!((v - (3.0 * t - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(resample_linear(&rec(vec![0.], vec![1.]), 5), Err(ForgeError::TooShort { len: 1 })));
    }

    #[test]
    fn zscore_examples() {
        let z = normalize_zscore(&rec(vec![0., 1., 2.], vec![1., 2., 3.])).unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        let want = [-1.0 / s, 0.0, 1.0 / s];
        for (a, b) in z.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((z.values[2] - 1.224745).abs() < 1e-6);
        let again = normalize_zscore(&z).unwrap();
        for (a, b) in again.values.iter().zip(&z.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            normalize_zscore(&rec(vec![0., 1., 2.], vec![5., 5., 5.])),
            Err(ForgeError::ConstantSignal { .. })
        ));
    }

    #[test]
    fn canonical_pipeline_invariants() {
        let ds = generate_dataset(&GeneratorConfig { patients_per_scenario: 2, seed: 4, ..Default::default() }).unwrap();
        let c = canonicalize(&ds, &CanonicalOptions::default()).unwrap();
        assert!(c.is_canonical());
        assert_eq!(c.len(), ds.len());
        for r in c.records() {
            assert_eq!(r.len(), 1000);
            assert!(mean(&r.values).abs() < 1e-9);
            assert!((population_variance(&r.values) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_cells_are_excluded_not_zero_filled() {
        let mut ds = generate_dataset(&GeneratorConfig { patients_per_scenario: 1, seed: 4, ..Default::default() }).unwrap();
        let key = ds.records().next().unwrap().key();
        let r = ds.records.get_mut(&key).unwrap();
        r.values.iter_mut().for_each(|v| *v = 3.0);
        let c = canonicalize(&ds, &CanonicalOptions::default()).unwrap();
        assert!(c.get_cell(&key).is_none());
        assert_eq!(c.excluded.len(), 1);
        assert_eq!(c.excluded[0].cell, key);
    }

    proptest! {
        #[test]
        fn affine_signals_resample_exactly(n in 2usize..300, target in 2usize..300, a in -5.0f64..5.0, b in -5.0f64..5.0, span in 0.1f64..2.0) {
            let times: Vec<f64> = (0..n).map(|i| i as f64 * span / (n - 1) as f64).collect();
            let values: Vec<f64> = times.iter().map(|t| a * t + b).collect();
            let r = resample_linear(&rec(times, values), target).unwrap();
            prop_assert_eq!(r.len(), target);
            for (t, v) in r.times.iter().zip(&r.values) {
                prop_assert!((v - (a * t + b)).abs() < 1e-12);
            }
        }
    }
}
