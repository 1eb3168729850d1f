use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{empty_matrix, Matrix, MetricsConfig, MetricsError, Paired, Result, Views};
use crate::embed::{EmbeddingMatrix, EmbeddingSet};
use crate::numerics::{mean, pca, pearson, NumericsError};
use crate::scenario::{Dataset, FeatureId};

/// How two multidimensional embeddings are correlated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementMode {
    /// Mean |Pearson| over dimensions `0..min(D_a, D_b)`.
    #[default]
    MatchedDimensions,
    /// |Pearson| of the first principal-component scores.
    FirstComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntanglement {
    pub scenario: String,
    /// Feature x feature mean |correlation|, patient-averaged.
    pub matrices: Paired<Matrix>,
}

/// Per-(scenario, patient) values of one feature pair, scenario-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistribution {
    pub a: FeatureId,
    pub b: FeatureId,
    pub values: Paired<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub dataset_digest: String,
    pub mode: EntanglementMode,
    pub features: Vec<FeatureId>,
    pub scenarios: Vec<ScenarioEntanglement>,
    /// Mean over scenarios and feature pairs.
    pub grand_mean: Paired<f64>,
    pub pairs: Vec<PairDistribution>,
    pub notices: Vec<String>,
}

fn first_component(m: &EmbeddingMatrix) -> std::result::Result<Vec<f64>, NumericsError> {
    let p = pca(&m.data)?;
    Ok(p.transform(&m.data, 1).column(0).iter().copied().collect())
}

/// Correlation magnitude between two cells; `None` when every dimension is
/// degenerate.
fn pair_value(a: &EmbeddingMatrix, b: &EmbeddingMatrix, mode: EntanglementMode, notices: &mut Vec<String>) -> Option<f64> {
    match mode {
        EntanglementMode::MatchedDimensions => {
            let k = a.cols().min(b.cols());
            let mut vals = Vec::with_capacity(k);
            for d in 0..k {
                match pearson(a.column(d), b.column(d)) {
                    Ok(r) => vals.push(r.abs()),
                    Err(e) => notices.push(format!("{} vs {} dim {d}: {e}", a.meta.cell(), b.meta.cell())),
                }
            }
            (!vals.is_empty()).then(|| mean(&vals))
        }
        EntanglementMode::FirstComponent => {
            let r = first_component(a).and_then(|x| first_component(b).and_then(|y| pearson(&x, &y)));
            match r {
                Ok(r) => Some(r.abs()),
                Err(e) => {
                    notices.push(format!("{} vs {}: {e}", a.meta.cell(), b.meta.cell()));
                    None
                }
            }
        }
    }
}

struct PairResult {
    /// Patient-averaged value, then per-patient values.
    mean: Option<f64>,
    per_patient: Vec<f64>,
    notices: Vec<String>,
}

fn pair_in_scenario(v: &Views, view: &EmbeddingSet, s: &str, a: FeatureId, b: FeatureId, mode: EntanglementMode) -> PairResult {
    let mut notices = Vec::new();
    let mut per_patient = Vec::new();
    for p in v.patient_ids() {
        let (Some(ea), Some(eb)) = (v.cell(view, s, p, a), v.cell(view, s, p, b)) else { continue };
        if let Some(x) = pair_value(ea, eb, mode, &mut notices) {
            per_patient.push(x);
        }
    }
    let mean = (!per_patient.is_empty()).then(|| mean(&per_patient));
    PairResult { mean, per_patient, notices }
}

/// Mean absolute correlation between features within each scenario.
pub fn feature_entanglement(ds: &Dataset, emb: &EmbeddingSet, cfg: &MetricsConfig) -> Result<EntanglementReport> {
    let v = Views::new(ds, emb, cfg)?;
    let features = v.features().to_vec();
    let nf = features.len();
    let mut jobs = Vec::new();
    for (si, s) in v.scenarios().iter().enumerate() {
        for i in 0..nf {
            for j in (i + 1)..nf {
                jobs.push((si, s.as_str(), i, j));
            }
        }
    }
    let results: Vec<Paired<PairResult>> = jobs
        .par_iter()
        .map(|&(_, s, i, j)| {
            v.pair().map(|view| pair_in_scenario(&v, view, s, features[i], features[j], cfg.entanglement_mode))
        })
        .collect();

    let mut scenarios: Vec<ScenarioEntanglement> = v
        .scenarios()
        .iter()
        .map(|s| {
            let mut m = empty_matrix(nf);
            for (k, row) in m.iter_mut().enumerate() {
                row[k] = Some(1.0);
            }
            ScenarioEntanglement { scenario: s.clone(), matrices: Paired::new(m.clone(), m) }
        })
        .collect();
    let mut pairs: Vec<PairDistribution> = Vec::new();
    for i in 0..nf {
        for j in (i + 1)..nf {
            pairs.push(PairDistribution {
                a: features[i],
                b: features[j],
                values: Paired::new(Vec::new(), Vec::new()),
            });
        }
    }
    let pair_slot = |i: usize, j: usize| i * (2 * nf - i - 1) / 2 + (j - i - 1);

    let mut notices = Vec::new();
    let mut grand: Paired<Vec<f64>> = Paired::new(Vec::new(), Vec::new());
    for (&(si, _, i, j), res) in jobs.iter().zip(results) {
        let sc = &mut scenarios[si].matrices;
        let slot = &mut pairs[pair_slot(i, j)].values;
        for (mat, r, dist, g) in [
            (&mut sc.raw, res.raw, &mut slot.raw, &mut grand.raw),
            (&mut sc.embedded, res.embedded, &mut slot.embedded, &mut grand.embedded),
        ] {
            mat[i][j] = r.mean;
            mat[j][i] = r.mean;
            dist.extend(r.per_patient);
            g.extend(r.mean);
            notices.extend(r.notices);
        }
    }
    let grand_mean = grand.map(|g| if g.is_empty() { f64::NAN } else { mean(&g) });
    if grand_mean.raw.is_nan() || grand_mean.embedded.is_nan() {
        return Err(MetricsError::TooFewSamples {
            context: "entanglement (no feature pair present in any scenario)".into(),
            needed: 1,
            got: 0,
        });
    }
    Ok(EntanglementReport {
        dataset_digest: v.digest,
        mode: cfg.entanglement_mode,
        features,
        scenarios,
        grand_mean,
        pairs,
        notices,
    })
}
