use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Context, MetricsConfig, MetricsError, Paired, Result, Views};
use crate::embed::EmbeddingSet;
use crate::numerics::{components_for_variance, mean, pca, DEGENERACY_EPS};
use crate::scenario::Dataset;
use crate::seed::{self, derive_seed};

/// Number of principal components kept for plotting.
const PLOT_COMPONENTS: usize = 3;

/// Smoothness of an `N x k` trajectory relative to shuffled copies of it.
///
/// With `v` the mean step length and `M` the mean distance from the
/// centroid, the statistic is `u = v / M`. The result is
/// `1 - u / mean(u_perm)` over `n_perm` row permutations: 1 for a perfectly
/// smooth path, about 0 for a temporally random one, negative for paths that
/// jump further than chance.
pub fn trajectory_smoothness(traj: &DMatrix<f64>, n_perm: usize, seed: u64) -> Result<f64> {
    let (n, k) = traj.shape();
    if n < 3 {
        return Err(MetricsError::TooFewSamples { context: "trajectory".into(), needed: 3, got: n });
    }
    if n_perm < 1 {
        return Err(MetricsError::InvalidConfig("n_perm must be at least 1".into()));
    }
    let rows: Vec<f64> = (0..n).flat_map(|i| traj.row(i).iter().copied().collect::<Vec<_>>()).collect();
    let point = |i: usize| &rows[i * k..(i + 1) * k];
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();

    let centroid: Vec<f64> = (0..k).map(|j| (0..n).map(|i| point(i)[j]).sum::<f64>() / n as f64).collect();
    let magnitude = (0..n).map(|i| dist(point(i), &centroid)).sum::<f64>() / n as f64;
    if !(magnitude > DEGENERACY_EPS) {
        return Err(MetricsError::ZeroMagnitude);
    }
    let velocity = |order: &[usize]| order.windows(2).map(|w| dist(point(w[0]), point(w[1]))).sum::<f64>() / (n - 1) as f64;

    let mut order: Vec<usize> = (0..n).collect();
    let v = velocity(&order);
    let mut rng = seed::rng(seed);
    let mut perm_total = 0.0;
    for _ in 0..n_perm {
        order.shuffle(&mut rng);
        perm_total += velocity(&order);
    }
    // the magnitude normaliser cancels: permutations leave it unchanged
    let u = v / magnitude;
    let u_rand = perm_total / n_perm as f64 / magnitude;
    Ok(1.0 - u / u_rand)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsEntry {
    pub scenario: String,
    /// Set in per-patient mode.
    pub patient: Option<String>,
    /// Components needed to reach the variance threshold.
    pub dimensionality: Paired<usize>,
    pub smoothness: Paired<f64>,
    pub explained_variance_ratio: Paired<Vec<f64>>,
    /// Leading principal-component scores over time, one vector per
    /// component.
    pub trajectory: Paired<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub dataset_digest: String,
    pub seed: u64,
    pub n_perm: usize,
    pub variance_threshold: f64,
    pub per_patient: bool,
    pub entries: Vec<DynamicsEntry>,
    pub mean_dimensionality: Paired<f64>,
    pub mean_smoothness: Paired<f64>,
    /// Entries whose smoothness is negative (reported unclamped).
    pub negative_smoothness: Vec<String>,
    pub notices: Vec<String>,
}

struct Analysis {
    dimensionality: usize,
    smoothness: f64,
    ratios: Vec<f64>,
    trajectory: Vec<Vec<f64>>,
}

/// Stacks the (averaged) feature matrices of one scenario side by side.
fn stacked(v: &Views, view: &EmbeddingSet, s: &str, patients: &[&str]) -> Result<Option<DMatrix<f64>>> {
    let mut parts = Vec::new();
    for &f in v.features() {
        if let Some(m) = v.averaged(view, s, patients, f)? {
            parts.push(m);
        }
    }
    if parts.is_empty() {
        return Ok(None);
    }
    let width = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(v.len(), width);
    let mut c = 0;
    for m in parts {
        out.view_mut((0, c), m.shape()).copy_from(&m);
        c += m.ncols();
    }
    Ok(Some(out))
}

fn analyse(x: &DMatrix<f64>, cfg: &MetricsConfig, smooth_seed: u64, label: &str) -> Result<Analysis> {
    let p = pca(x).context(|| format!("PCA of {label}"))?;
    let k = components_for_variance(&p.explained_variance_ratio, cfg.variance_threshold);
    let reduced = p.transform(x, k);
    let smoothness = trajectory_smoothness(&reduced, cfg.n_perm, smooth_seed)?;
    let shown = p.transform(x, PLOT_COMPONENTS.min(p.components.len()));
    Ok(Analysis {
        dimensionality: k,
        smoothness,
        ratios: p.explained_variance_ratio,
        trajectory: shown.column_iter().map(|c| c.iter().copied().collect()).collect(),
    })
}

/// PCA trajectories of each scenario's multivariate episode, raw versus
/// embedded.
pub fn temporal_dynamics(ds: &Dataset, emb: &EmbeddingSet, cfg: &MetricsConfig, seed: u64) -> Result<DynamicsReport> {
    let v = Views::new(ds, emb, cfg)?;
    let patients = v.patient_ids();
    let mut units: Vec<(String, Option<String>)> = Vec::new();
    for s in v.scenarios() {
        if cfg.per_patient {
            units.extend(patients.iter().map(|p| (s.clone(), Some(p.to_string()))));
        } else {
            units.push((s.clone(), None));
        }
    }
    let results: Vec<Result<Option<DynamicsEntry>>> = units
        .par_iter()
        .map(|(s, p)| {
            let members: Vec<&str> = match p {
                Some(p) => vec![p.as_str()],
                None => patients.clone(),
            };
            let label = match p {
                Some(p) => format!("{s}/{p}"),
                None => s.clone(),
            };
            let smooth_seed = derive_seed(seed, &["smoothness", s, p.as_deref().unwrap_or("")]);
            let (Some(raw), Some(embedded)) = (stacked(&v, &v.raw, s, &members)?, stacked(&v, v.embedded, s, &members)?)
            else {
                return Ok(None);
            };
            let a = analyse(&raw, cfg, smooth_seed, &format!("{label} raw"))?;
            let b = analyse(&embedded, cfg, smooth_seed, &format!("{label} embedded"))?;
            Ok(Some(DynamicsEntry {
                scenario: s.clone(),
                patient: p.clone(),
                dimensionality: Paired::new(a.dimensionality, b.dimensionality),
                smoothness: Paired::new(a.smoothness, b.smoothness),
                explained_variance_ratio: Paired::new(a.ratios, b.ratios),
                trajectory: Paired::new(a.trajectory, b.trajectory),
            }))
        })
        .collect();

    let mut entries = Vec::new();
    let mut notices = Vec::new();
    for ((s, p), r) in units.iter().zip(results) {
        match r? {
            Some(e) => entries.push(e),
            None => notices.push(format!("{s}{}: no cells present", p.as_ref().map(|p| format!("/{p}")).unwrap_or_default())),
        }
    }
    if entries.is_empty() {
        return Err(MetricsError::TooFewSamples { context: "temporal dynamics".into(), needed: 1, got: 0 });
    }
    let mut negative_smoothness = Vec::new();
    for e in &entries {
        let unit = format!("{}{}", e.scenario, e.patient.as_ref().map(|p| format!("/{p}")).unwrap_or_default());
        for (which, val) in [("raw", e.smoothness.raw), ("embedded", e.smoothness.embedded)] {
            if val < 0.0 {
                negative_smoothness.push(format!("{unit} {which}"));
            }
        }
    }
    let avg = |f: &dyn Fn(&DynamicsEntry) -> f64| mean(&entries.iter().map(f).collect::<Vec<_>>());
    Ok(DynamicsReport {
        dataset_digest: v.digest,
        seed,
        n_perm: cfg.n_perm,
        variance_threshold: cfg.variance_threshold,
        per_patient: cfg.per_patient,
        mean_dimensionality: Paired::new(
            avg(&|e| e.dimensionality.raw as f64),
            avg(&|e| e.dimensionality.embedded as f64),
        ),
        mean_smoothness: Paired::new(avg(&|e| e.smoothness.raw), avg(&|e| e.smoothness.embedded)),
        entries,
        negative_smoothness,
        notices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |i, _| i as f64)
    }

    #[test]
    fn ramp_is_smooth() {
        let s = trajectory_smoothness(&ramp(1000), 1000, 7).unwrap();
        // sequential step 1, shuffled mean step about n/3
        assert!((0.95..=1.0).contains(&s), "{s}");
        assert!((s - (1.0 - 3.0 / 999.0)).abs() < 0.01);
    }

    #[test]
    fn shuffled_ramp_is_random() {
        let mut order: Vec<usize> = (0..1000).collect();
        order.shuffle(&mut seed::rng(99));
        let m = DMatrix::from_fn(1000, 1, |i, _| order[i] as f64);
        let s = trajectory_smoothness(&m, 1000, 7).unwrap();
        assert!(s.abs() <= 0.05, "{s}");
    }

    #[test]
    fn constant_trajectory_has_no_magnitude() {
        let m = DMatrix::from_element(10, 2, 3.5);
        assert!(matches!(trajectory_smoothness(&m, 10, 0), Err(MetricsError::ZeroMagnitude)));
    }

    #[test]
    fn alternating_path_is_negative() {
        // jumps between two far clusters every step: worse than chance
        let m = DMatrix::from_fn(200, 1, |i, _| if i % 2 == 0 { 0.0 } else { 10.0 });
        assert!(trajectory_smoothness(&m, 200, 1).unwrap() < 0.0);
    }

    #[test]
    fn needs_three_points() {
        assert!(matches!(trajectory_smoothness(&ramp(2), 10, 0), Err(MetricsError::TooFewSamples { .. })));
    }

    #[test]
    fn deterministic_given_seed() {
        let m = DMatrix::from_fn(300, 2, |i, j| ((i * (j + 2)) as f64).sin());
        assert_eq!(
            trajectory_smoothness(&m, 50, 3).unwrap().to_bits(),
            trajectory_smoothness(&m, 50, 3).unwrap().to_bits()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bounded_and_scale_invariant(
            pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 3..60),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
            seed in any::<u64>(),
        ) {
            let n = pts.len();
            let m = DMatrix::from_fn(n, 2, |i, j| pts[i][j]);
            prop_assume!(m.row_iter().any(|r| (r - m.row(0)).norm() > 1e-6));
            let s = trajectory_smoothness(&m, 20, seed).unwrap();
            prop_assert!(s <= 1.0);
            let t = trajectory_smoothness(&m.map(|v| v * scale + shift), 20, seed).unwrap();
            prop_assert!((s - t).abs() < 1e-9);
        }
    }
}
