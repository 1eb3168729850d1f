use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{empty_matrix, off_diagonal_stats, Context, Matrix, MetricsConfig, MetricsError, Paired, Result, Views};
use crate::embed::EmbeddingSet;
use crate::numerics::{components_for_variance, cosine_similarity, mean, pca};
use crate::scenario::{Dataset, FeatureId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub dataset_digest: String,
    pub scenarios: Vec<String>,
    /// Features used; those missing from any scenario are left out.
    pub features: Vec<FeatureId>,
    pub per_patient: bool,
    /// Scenario x scenario cosine similarity.
    pub cosine: Paired<Matrix>,
    /// `None` with fewer than two scenarios.
    pub mean_off_diagonal: Paired<Option<f64>>,
    /// Components of the cross-scenario PCA reaching the variance threshold.
    pub dimensionality: Paired<Option<usize>>,
    pub notices: Vec<String>,
}

/// Flattened episode of one scenario: every feature's (averaged) matrix in
/// feature order.
fn scenario_vector(v: &Views, view: &EmbeddingSet, s: &str, patients: &[&str], features: &[FeatureId]) -> Result<Option<Vec<f64>>> {
    let mut out = Vec::new();
    for &f in features {
        match v.averaged(view, s, patients, f)? {
            Some(m) => out.extend_from_slice(m.as_slice()),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

struct ViewResult {
    cosine: Matrix,
    dimensionality: Option<usize>,
}

fn check_lengths(vectors: &[(usize, Vec<f64>)], scenarios: &[String]) -> Result<()> {
    if let Some((i0, v0)) = vectors.first() {
        if let Some((i, v)) = vectors.iter().find(|(_, v)| v.len() != v0.len()) {
            return Err(MetricsError::Shape(format!(
                "scenario {} has {} embedded values, scenario {} has {}",
                scenarios[*i],
                v.len(),
                scenarios[*i0],
                v0.len()
            )));
        }
    }
    Ok(())
}

fn run_view(v: &Views, view: &EmbeddingSet, features: &[FeatureId], cfg: &MetricsConfig) -> Result<ViewResult> {
    let scenarios = v.scenarios();
    let ns = scenarios.len();
    let patients = v.patient_ids();
    // groups of patients whose vectors are compared with each other
    let groups: Vec<Vec<&str>> =
        if cfg.per_patient { patients.iter().map(|p| vec![*p]).collect() } else { vec![patients.clone()] };

    let mut sums = vec![vec![Vec::new(); ns]; ns];
    let mut pca_rows: Vec<Vec<f64>> = Vec::new();
    for group in &groups {
        let mut vectors = Vec::new();
        for (i, s) in scenarios.iter().enumerate() {
            if let Some(x) = scenario_vector(v, view, s, group, features)? {
                vectors.push((i, x));
            }
        }
        check_lengths(&vectors, scenarios)?;
        for (a, (i, x)) in vectors.iter().enumerate() {
            for (j, y) in &vectors[a..] {
                let c = cosine_similarity(x, y).context(|| format!("scenario {} vs {}", scenarios[*i], scenarios[*j]))?;
                sums[*i][*j].push(c);
                if i != j {
                    sums[*j][*i].push(c);
                }
            }
        }
        pca_rows.extend(vectors.into_iter().map(|(_, x)| x));
    }
    let mut cosine = empty_matrix(ns);
    for i in 0..ns {
        for j in 0..ns {
            if !sums[i][j].is_empty() {
                cosine[i][j] = Some(if i == j { 1.0 } else { mean(&sums[i][j]) });
            }
        }
    }
    let dimensionality = if pca_rows.len() >= 2 && pca_rows.iter().all(|r| r.len() == pca_rows[0].len()) {
        let x = DMatrix::from_fn(pca_rows.len(), pca_rows[0].len(), |i, j| pca_rows[i][j]);
        match pca(&x) {
            Ok(p) => Some(components_for_variance(&p.explained_variance_ratio, cfg.variance_threshold)),
            Err(_) => None,
        }
    } else {
        None
    };
    Ok(ViewResult { cosine, dimensionality })
}

/// Cosine similarity between whole-scenario episodes, raw versus embedded.
pub fn scenario_similarity(ds: &Dataset, emb: &EmbeddingSet, cfg: &MetricsConfig) -> Result<ScenarioReport> {
    let v = Views::new(ds, emb, cfg)?;
    let mut notices = Vec::new();
    let features: Vec<FeatureId> = v
        .features()
        .iter()
        .copied()
        .filter(|&f| {
            let everywhere = v
                .scenarios()
                .iter()
                .all(|s| v.patient_ids().iter().any(|p| v.ds.get(s, p, f).is_some()));
            if !everywhere {
                notices.push(format!("feature {f} is missing from at least one scenario; left out"));
            }
            everywhere
        })
        .collect();
    if features.is_empty() {
        return Err(MetricsError::TooFewSamples { context: "scenario similarity".into(), needed: 1, got: 0 });
    }
    let raw = run_view(&v, &v.raw, &features, cfg)?;
    let embedded = run_view(&v, v.embedded, &features, cfg)?;
    let cosine = Paired::new(raw.cosine, embedded.cosine);
    Ok(ScenarioReport {
        dataset_digest: v.digest.clone(),
        scenarios: v.scenarios().to_vec(),
        features,
        per_patient: cfg.per_patient,
        mean_off_diagonal: cosine.as_ref().map(|m| off_diagonal_stats(m).map(|s| s.0)),
        cosine,
        dimensionality: Paired::new(raw.dimensionality, embedded.dimensionality),
        notices,
    })
}
