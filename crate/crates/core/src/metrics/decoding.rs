use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{empty_matrix, off_diagonal_stats, Context, Matrix, MetricsConfig, MetricsError, Paired, Result, Views};
use crate::embed::{EmbeddingMatrix, EmbeddingSet};
use crate::numerics::{auc_roc, logistic_fit, stratified_split, SplitPlan};
use crate::scenario::{Dataset, FeatureId};
use crate::seed::{self, derive_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingPair {
    pub a: FeatureId,
    pub b: FeatureId,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub converged: Paired<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingReport {
    pub dataset_digest: String,
    pub features: Vec<FeatureId>,
    pub window: usize,
    pub seed: u64,
    pub labels_permuted: bool,
    /// Pairwise test AUC; the diagonal is undefined.
    pub auc: Paired<Matrix>,
    /// Mean and population standard deviation over pairs.
    pub mean: Paired<f64>,
    pub std: Paired<f64>,
    pub pairs: Vec<DecodingPair>,
    pub notices: Vec<String>,
}

/// One window of one cell.
struct Sample<'a> {
    scenario: usize,
    label: bool,
    scenario_name: &'a str,
    patient: &'a str,
    feature: FeatureId,
    start: usize,
}

/// `window` consecutive rows of every sample's cell, flattened row by row.
/// For `T x 1` matrices this is the raw window itself.
fn design(v: &Views, view: &EmbeddingSet, samples: &[Sample], idx: &[usize], window: usize) -> Result<DMatrix<f64>> {
    let cells: Vec<&EmbeddingMatrix> = idx
        .iter()
        .map(|&i| {
            let s = &samples[i];
            v.cell(view, s.scenario_name, s.patient, s.feature).expect("sample cells are present")
        })
        .collect();
    let d = cells.first().map_or(1, |m| m.cols());
    if let Some(m) = cells.iter().find(|m| m.cols() != d) {
        return Err(MetricsError::Shape(format!("{} has {} columns, expected {d}", m.meta.cell(), m.cols())));
    }
    let mut x = DMatrix::zeros(idx.len(), window * d);
    for (r, (&i, m)) in idx.iter().zip(&cells).enumerate() {
        let start = samples[i].start;
        for t in 0..window {
            for c in 0..d {
                x[(r, t * d + c)] = m.data[(start + t, c)];
            }
        }
    }
    Ok(x)
}

struct PairOutcome {
    auc: Paired<f64>,
    info: DecodingPair,
    notices: Vec<String>,
}

fn decode_pair(v: &Views, cfg: &MetricsConfig, seed: u64, a: FeatureId, b: FeatureId) -> Result<Option<PairOutcome>> {
    let windows = v.len() / cfg.window;
    let mut samples = Vec::new();
    for (si, s) in v.scenarios().iter().enumerate() {
        for p in v.patient_ids() {
            for (f, label) in [(a, false), (b, true)] {
                if v.ds.get(s, p, f).is_some() {
                    samples.extend((0..windows).map(|w| Sample {
                        scenario: si,
                        label,
                        scenario_name: s,
                        patient: p,
                        feature: f,
                        start: w * cfg.window,
                    }));
                }
            }
        }
    }
    if !samples.iter().any(|s| s.label) || !samples.iter().any(|s| !s.label) {
        return Ok(None);
    }
    let split_seed = derive_seed(seed, &["decoding", a.name(), b.name()]);
    let mut labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
    if cfg.permute_labels {
        labels.shuffle(&mut seed::derived_rng(split_seed, &["permute"]));
    }
    // windows of both features covering the same stretch of the same episode
    // form one unit, so a window and its counterpart never straddle the split
    let mut units: Vec<Vec<usize>> = Vec::new();
    let mut unit_of = std::collections::BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let u = *unit_of.entry((s.scenario, s.patient, s.start)).or_insert_with(|| {
            units.push(Vec::new());
            units.len() - 1
        });
        units[u].push(i);
    }
    let class_of: Vec<usize> = units.iter().map(|u| samples[u[0]].scenario).collect();
    let unit_plan = stratified_split(&class_of, cfg.train_fraction, split_seed);
    let expand = |idx: &[usize]| idx.iter().flat_map(|&u| units[u].iter().copied()).collect::<Vec<usize>>();
    let plan = SplitPlan {
        train: expand(&unit_plan.train),
        test: expand(&unit_plan.test),
        ..unit_plan
    };
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<bool>>();
    let (y_train, y_test) = (pick(&plan.train), pick(&plan.test));

    let ctx = |view: &str| format!("decoding {a} vs {b} ({view})");
    let run = |view: &EmbeddingSet, name: &str| -> Result<(f64, bool)> {
        let x_train = design(v, view, &samples, &plan.train, cfg.window)?;
        let x_test = design(v, view, &samples, &plan.test, cfg.window)?;
        let model = logistic_fit(&x_train, &y_train, cfg.logistic).context(|| ctx(name))?;
        let auc = auc_roc(&model.decision_function(&x_test), &y_test).context(|| ctx(name))?;
        Ok((auc, model.converged))
    };
    let (raw_auc, raw_conv) = run(&v.raw, "raw")?;
    let (emb_auc, emb_conv) = run(v.embedded, "embedded")?;
    let mut notices: Vec<String> = plan.warnings.iter().map(|w| format!("{}: {w}", ctx("split"))).collect();
    for (ok, name) in [(raw_conv, "raw"), (emb_conv, "embedded")] {
        if !ok {
            notices.push(format!("{}: probe did not converge", ctx(name)));
        }
    }
    Ok(Some(PairOutcome {
        auc: Paired::new(raw_auc, emb_auc),
        info: DecodingPair {
            a,
            b,
            split_seed,
            n_train: plan.train.len(),
            n_test: plan.test.len(),
            converged: Paired::new(raw_conv, emb_conv),
        },
        notices,
    }))
}

/// Pairwise decoding of feature identity with a logistic probe.
///
/// A sample is a window of `cfg.window` consecutive timesteps taken at
/// stride `cfg.window`. For embeddings the window's rows are concatenated, so
/// identity embeddings reproduce the raw windows. Samples are pooled over
/// scenarios and patients. The split keeps the two features' windows over
/// the same stretch of an episode together and is stratified by scenario.
pub fn feature_decoding(ds: &Dataset, emb: &EmbeddingSet, cfg: &MetricsConfig, seed: u64) -> Result<DecodingReport> {
    let v = Views::new(ds, emb, cfg)?;
    if cfg.window > v.len() {
        return Err(MetricsError::InvalidConfig(format!(
            "decoding window {} exceeds signal length {}",
            cfg.window,
            v.len()
        )));
    }
    let features = v.features().to_vec();
    let nf = features.len();
    let jobs: Vec<(usize, usize)> = (0..nf).flat_map(|i| ((i + 1)..nf).map(move |j| (i, j))).collect();
    let outcomes: Vec<Result<Option<PairOutcome>>> =
        jobs.par_iter().map(|&(i, j)| decode_pair(&v, cfg, seed, features[i], features[j])).collect();

    let mut auc = Paired::new(empty_matrix(nf), empty_matrix(nf));
    let mut pairs = Vec::new();
    let mut notices = Vec::new();
    for (&(i, j), out) in jobs.iter().zip(outcomes) {
        match out? {
            Some(o) => {
                for (m, val) in [(&mut auc.raw, o.auc.raw), (&mut auc.embedded, o.auc.embedded)] {
                    m[i][j] = Some(val);
                    m[j][i] = Some(val);
                }
                pairs.push(o.info);
                notices.extend(o.notices);
            }
            None => notices.push(format!("decoding {} vs {}: a feature has no cells", features[i], features[j])),
        }
    }
    let stats = auc.as_ref().map(off_diagonal_stats);
    let (Some(raw), Some(embedded)) = (stats.raw, stats.embedded) else {
        return Err(MetricsError::TooFewSamples { context: "feature decoding".into(), needed: 1, got: 0 });
    };
    Ok(DecodingReport {
        dataset_digest: v.digest,
        features,
        window: cfg.window,
        seed,
        labels_permuted: cfg.permute_labels,
        auc,
        mean: Paired::new(raw.0, embedded.0),
        std: Paired::new(raw.1, embedded.1),
        pairs,
        notices,
    })
}
