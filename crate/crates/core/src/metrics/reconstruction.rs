use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{empty_matrix, Matrix, MetricsConfig, MetricsError, Paired, Result, Views};
use crate::embed::EmbeddingSet;
use crate::numerics::{kfold_indices, mean, population_std, r2, stratified_split, NumericsError, RidgeModel};
use crate::scenario::{Dataset, FeatureId};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub dataset_digest: String,
    pub features: Vec<FeatureId>,
    pub seed: u64,
    pub split_seed: u64,
    pub cv_folds: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Row = embedding source feature, column = reconstructed raw feature.
    pub test_r2: Paired<Matrix>,
    pub cv_mean: Paired<Matrix>,
    pub cv_std: Paired<Matrix>,
    pub notices: Vec<String>,
}

/// Assignment of every (scenario, patient, timestep) sample to a CV fold or
/// to the test set.
struct Layout {
    groups: Vec<(String, String)>,
    /// `roles[g][t]` is a fold index, or `folds` for test.
    roles: Vec<Vec<usize>>,
    folds: usize,
    n_train: usize,
    n_test: usize,
}

impl Layout {
    fn new(v: &Views, cfg: &MetricsConfig, split_seed: u64, fold_seed: u64) -> Result<Self> {
        let t = v.len();
        let mut groups = Vec::new();
        let mut class_of = Vec::new();
        for (si, s) in v.scenarios().iter().enumerate() {
            for p in v.patient_ids() {
                if v.features().iter().any(|&f| v.ds.get(s, p, f).is_some()) {
                    groups.push((s.clone(), p.to_string()));
                    class_of.extend(std::iter::repeat(si).take(t));
                }
            }
        }
        let plan = stratified_split(&class_of, cfg.train_fraction, split_seed);
        if plan.test.is_empty() || plan.train.len() < cfg.cv_folds {
            return Err(MetricsError::TooFewSamples {
                context: "reconstruction split".into(),
                needed: cfg.cv_folds + 1,
                got: class_of.len(),
            });
        }
        let mut roles = vec![vec![cfg.cv_folds; t]; groups.len()];
        let folds = kfold_indices(plan.train.len(), cfg.cv_folds, fold_seed)
            .map_err(|source| MetricsError::Numerics { context: "reconstruction folds".into(), source })?;
        for (k, fold) in folds.iter().enumerate() {
            for &pos in fold {
                let i = plan.train[pos];
                roles[i / t][i % t] = k;
            }
        }
        Ok(Self { groups, roles, folds: cfg.cv_folds, n_train: plan.train.len(), n_test: plan.test.len() })
    }

    fn rows(&self, g: usize, role: usize) -> Vec<usize> {
        self.roles[g].iter().enumerate().filter(|(_, &r)| r == role).map(|(t, _)| t).collect()
    }
}

/// Rows of one group with one role, plus their moments.
struct Block {
    rows: Vec<usize>,
    x: DMatrix<f64>,
    sxx: DMatrix<f64>,
    sx: DVector<f64>,
}

struct TargetBlock {
    y: Vec<f64>,
    sxy: DVector<f64>,
    sy: f64,
}

struct SourceResult {
    test: Vec<Option<f64>>,
    cv: Vec<Vec<Option<f64>>>,
    notices: Vec<String>,
}

fn fit(
    blocks: &[(usize, &Vec<Block>)],
    targets: &[Vec<TargetBlock>],
    held_out: usize,
    layout: &Layout,
    lambda: f64,
) -> std::result::Result<RidgeModel, NumericsError> {
    let d = blocks[0].1[0].sx.len();
    let mut n = 0usize;
    let mut sx = DVector::zeros(d);
    let mut sxx = DMatrix::zeros(d, d);
    let mut sxy = DVector::zeros(d);
    let mut sy = 0.0;
    for (k, (_, bl)) in blocks.iter().enumerate() {
        for r in (0..layout.folds).filter(|&r| r != held_out) {
            n += bl[r].rows.len();
            sx += &bl[r].sx;
            sxx += &bl[r].sxx;
            sxy += &targets[k][r].sxy;
            sy += targets[k][r].sy;
        }
    }
    if n < 2 {
        return Err(NumericsError::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let xm = &sx / nf;
    let ym = sy / nf;
    let cxx = sxx - &xm * xm.transpose() * nf;
    let cxy = sxy - &xm * (ym * nf);
    RidgeModel::from_centred_moments(xm.as_slice(), ym, cxx, cxy.as_slice(), lambda)
}

fn score(
    model: &RidgeModel,
    blocks: &[(usize, &Vec<Block>)],
    targets: &[Vec<TargetBlock>],
    role: usize,
) -> std::result::Result<f64, NumericsError> {
    let w = DVector::from_column_slice(&model.weights);
    let mut y = Vec::new();
    let mut yhat = Vec::new();
    for (k, (_, bl)) in blocks.iter().enumerate() {
        y.extend_from_slice(&targets[k][role].y);
        yhat.extend((&bl[role].x * &w).iter().map(|z| z + model.intercept));
    }
    r2(&y, &yhat)
}

fn source_feature(v: &Views, view: &EmbeddingSet, layout: &Layout, src: FeatureId, lambda: f64) -> SourceResult {
    let nf = v.features().len();
    let mut notices = Vec::new();
    // groups holding the source cell, with their matrices
    let cells: Vec<(usize, &DMatrix<f64>)> = layout
        .groups
        .iter()
        .enumerate()
        .filter_map(|(g, (s, p))| v.cell(view, s, p, src).map(|m| (g, &m.data)))
        .collect();
    let empty = || SourceResult { test: vec![None; nf], cv: vec![vec![None; layout.folds]; nf], notices: Vec::new() };
    if cells.is_empty() {
        return empty();
    }
    // shift by the pooled column mean to keep the moment sums well scaled
    let d = cells[0].1.ncols();
    if cells.iter().any(|(_, m)| m.ncols() != d) {
        let mut r = empty();
        r.notices.push(format!("{src}: embedding width differs across cells; skipped"));
        return r;
    }
    let total_rows: usize = cells.iter().map(|(_, m)| m.nrows()).sum();
    let mu: DVector<f64> = cells.iter().map(|(_, m)| m.row_sum().transpose()).fold(DVector::zeros(d), |a, b| a + b)
        / total_rows as f64;
    let blocks: Vec<(usize, Vec<Block>)> = cells
        .iter()
        .map(|&(g, m)| {
            let bl = (0..=layout.folds)
                .map(|r| {
                    let rows = layout.rows(g, r);
                    let mut x = m.select_rows(rows.iter());
                    for mut row in x.row_iter_mut() {
                        row -= mu.transpose();
                    }
                    let sxx = x.transpose() * &x;
                    let sx = x.row_sum().transpose();
                    Block { rows, x, sxx, sx }
                })
                .collect();
            (g, bl)
        })
        .collect();

    let mut test = vec![None; nf];
    let mut cv = vec![vec![None; layout.folds]; nf];
    for (ti, &tgt) in v.features().iter().enumerate() {
        let mut used: Vec<(usize, &Vec<Block>)> = Vec::new();
        let mut targets: Vec<Vec<TargetBlock>> = Vec::new();
        for (g, bl) in &blocks {
            let (s, p) = &layout.groups[*g];
            let Some(rec) = v.ds.get(s, p, tgt) else { continue };
            let tb = bl
                .iter()
                .map(|b| {
                    let y: Vec<f64> = b.rows.iter().map(|&t| rec.values[t]).collect();
                    let sxy = b.x.tr_mul(&DVector::from_column_slice(&y));
                    let sy = y.iter().sum();
                    TargetBlock { y, sxy, sy }
                })
                .collect();
            used.push((*g, bl));
            targets.push(tb);
        }
        if used.is_empty() {
            continue;
        }
        let label = |what: &str| format!("{src} -> {tgt} ({what})");
        for (k, slot) in cv[ti].iter_mut().enumerate() {
            match fit(&used, &targets, k, layout, lambda).and_then(|m| score(&m, &used, &targets, k)) {
                Ok(r) => *slot = Some(r),
                Err(e) => notices.push(format!("{}: {e}", label(&format!("fold {k}")))),
            }
        }
        // held_out = folds excludes only the test role
        match fit(&used, &targets, layout.folds, layout, lambda).and_then(|m| score(&m, &used, &targets, layout.folds)) {
            Ok(r) => test[ti] = Some(r),
            Err(e) => notices.push(format!("{}: {e}", label("test"))),
        }
    }
    SourceResult { test, cv, notices }
}

/// Linear reconstruction of every raw feature from every feature's
/// embedding, pooled over scenarios and patients.
///
/// Samples are single timesteps. They are split into train and test
/// stratified by scenario; the train part is further split into CV folds.
/// The same assignment is used for every feature pair and for both views.
pub fn reconstruction_assessment(
    ds: &Dataset,
    emb: &EmbeddingSet,
    cfg: &MetricsConfig,
    seed: u64,
) -> Result<ReconstructionReport> {
    let v = Views::new(ds, emb, cfg)?;
    let split_seed = derive_seed(seed, &["reconstruction", "split"]);
    let layout = Layout::new(&v, cfg, split_seed, derive_seed(seed, &["reconstruction", "folds"]))?;
    let features = v.features().to_vec();
    let nf = features.len();

    let jobs: Vec<(bool, usize)> = [false, true].into_iter().flat_map(|e| (0..nf).map(move |i| (e, i))).collect();
    let results: Vec<SourceResult> = jobs
        .par_iter()
        .map(|&(embedded, i)| {
            let view = if embedded { v.embedded } else { &v.raw };
            source_feature(&v, view, &layout, features[i], cfg.ridge_lambda)
        })
        .collect();

    let mut test_r2 = Paired::new(empty_matrix(nf), empty_matrix(nf));
    let mut cv_mean = test_r2.clone();
    let mut cv_std = test_r2.clone();
    let mut notices = Vec::new();
    for (&(embedded, i), res) in jobs.iter().zip(results) {
        let (t, m, s) = if embedded {
            (&mut test_r2.embedded, &mut cv_mean.embedded, &mut cv_std.embedded)
        } else {
            (&mut test_r2.raw, &mut cv_mean.raw, &mut cv_std.raw)
        };
        t[i] = res.test;
        for (j, folds) in res.cv.iter().enumerate() {
            let vals: Vec<f64> = folds.iter().flatten().copied().collect();
            if vals.len() == folds.len() {
                m[i][j] = Some(mean(&vals));
                s[i][j] = Some(population_std(&vals));
            }
        }
        notices.extend(res.notices);
    }
    Ok(ReconstructionReport {
        dataset_digest: v.digest,
        features,
        seed,
        split_seed,
        cv_folds: cfg.cv_folds,
        n_train: layout.n_train,
        n_test: layout.n_test,
        test_r2,
        cv_mean,
        cv_std,
        notices,
    })
}
