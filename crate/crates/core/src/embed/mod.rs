//! Per-timestep embeddings of canonical signals.
//!
//! Reference embedders stand in for a real model. Each has a known effect on
//! the metrics, which makes them useful as oracles:
//!
//! | spec                | effect                                             |
//! |---------------------|----------------------------------------------------|
//! | `identity`          | none; every metric equals its raw counterpart      |
//! | `delay`             | lagged copies; linearly recoverable                |
//! | `random_projection` | seeded linear map of the delay rows                |
//! | `mixer`             | adds a confounder shared by all features of a scenario |
//! | `shuffler`          | permutes rows, destroying temporal order           |
//!
//! External models deliver matrices through the interchange files in [`io`];
//! [`align_embedding`] stretches them to the canonical length.

mod align;
pub mod io;

pub use align::align_embedding;
pub use io::{read_embedding, read_embedding_set, sidecar_path, write_embedding, write_embedding_set};

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{CellKey, Dataset, FeatureId, SignalRecord};
use crate::seed;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid embedder spec: {0}")]
    InvalidSpec(String),
    #[error("embedding has {rows} row(s); need at least 2")]
    TooShort { rows: usize },
    #[error("format error in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("metadata mismatch for {}: {message}", path.display())]
    MetadataMismatch { path: PathBuf, message: String },
    #[error("no embedding for cell {0}")]
    MissingCell(CellKey),
    #[error("embedding for {cell} has {rows} rows, expected {expected}")]
    RowMismatch { cell: CellKey, rows: usize, expected: usize },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, EmbedError>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    /// Reference spec id or external model id.
    pub model_id: String,
    pub scenario: String,
    pub patient: String,
    pub feature: FeatureId,
}

impl EmbeddingMeta {
    pub fn cell(&self) -> CellKey {
        CellKey::new(self.scenario.clone(), self.patient.clone(), self.feature)
    }
}

/// T x D matrix, one row per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub data: DMatrix<f64>,
    pub meta: EmbeddingMeta,
}

impl EmbeddingMatrix {
    pub fn new(data: DMatrix<f64>, meta: EmbeddingMeta) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(EmbedError::TooShort { rows: data.nrows() });
        }
        if data.ncols() < 1 {
            return Err(EmbedError::InvalidSpec("embedding needs at least one column".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidSpec(format!("non-finite entry in {}", meta.cell())));
        }
        Ok(Self { data, meta })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    /// Contiguous column `d` (the matrix is column-major).
    pub fn column(&self, d: usize) -> &[f64] {
        let t = self.rows();
        &self.data.as_slice()[d * t..(d + 1) * t]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderSpec {
    Identity,
    Delay { window: usize },
    RandomProjection { window: usize, dims: usize, seed: u64 },
    Mixer { base: Box<EmbedderSpec>, alpha: f64, seed: u64 },
    Shuffler { base: Box<EmbedderSpec>, seed: u64 },
}

impl EmbedderSpec {
    /// Stable identifier recorded as the embedding's model id.
    pub fn id(&self) -> String {
        match self {
            EmbedderSpec::Identity => "identity".into(),
            EmbedderSpec::Delay { window } => format!("delay(w={window})"),
            EmbedderSpec::RandomProjection { window, dims, seed } => {
                format!("random_projection(w={window},d={dims},seed={seed})")
            }
            EmbedderSpec::Mixer { base, alpha, seed } => format!("mixer({},alpha={alpha},seed={seed})", base.id()),
            EmbedderSpec::Shuffler { base, seed } => format!("shuffler({},seed={seed})", base.id()),
        }
    }

    pub fn validate(&self, t: usize) -> Result<()> {
        let bad = |m: String| Err(EmbedError::InvalidSpec(m));
        match self {
            EmbedderSpec::Identity => Ok(()),
            EmbedderSpec::Delay { window } | EmbedderSpec::RandomProjection { window, .. }
                if *window < 1 || *window > t =>
            {
                bad(format!("window {window} must be in 1..={t}"))
            }
            EmbedderSpec::RandomProjection { dims: 0, .. } => bad("dims must be at least 1".into()),
            EmbedderSpec::Delay { .. } | EmbedderSpec::RandomProjection { .. } => Ok(()),
            EmbedderSpec::Mixer { base, alpha, .. } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return bad(format!("alpha {alpha} must be finite and nonnegative"));
                }
                base.validate(t)
            }
            EmbedderSpec::Shuffler { base, .. } => base.validate(t),
        }
    }
}

fn delay_matrix(x: &[f64], window: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), window, |t, j| x[t.saturating_sub(j)])
}

fn projection_matrix(window: usize, dims: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seed::derived_rng(seed, &["projection"]);
    let scale = 1.0 / (window as f64).sqrt();
    // row-major fill so the draw order does not depend on storage layout
    let mut m = DMatrix::zeros(window, dims);
    for i in 0..window {
        for j in 0..dims {
            let z: f64 = StandardNormal.sample(&mut rng);
            m[(i, j)] = z * scale;
        }
    }
    m
}

/// Seeded white-noise confounder shared by every cell of `scenario`.
pub fn confounder(seed: u64, scenario: &str, len: usize) -> Vec<f64> {
    let mut rng = seed::derived_rng(seed, &["confounder", scenario]);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn embed_values(record: &SignalRecord, spec: &EmbedderSpec) -> DMatrix<f64> {
    let x = &record.values;
    match spec {
        EmbedderSpec::Identity => DMatrix::from_column_slice(x.len(), 1, x),
        EmbedderSpec::Delay { window } => delay_matrix(x, *window),
        EmbedderSpec::RandomProjection { window, dims, seed } => {
            delay_matrix(x, *window) * projection_matrix(*window, *dims, *seed)
        }
        EmbedderSpec::Mixer { base, alpha, seed } => {
            let mut m = embed_values(record, base);
            if *alpha != 0.0 {
                let c = confounder(*seed, &record.scenario, x.len());
                for mut col in m.column_iter_mut() {
                    for (v, ct) in col.iter_mut().zip(&c) {
                        *v += alpha * ct;
                    }
                }
            }
            m
        }
        EmbedderSpec::Shuffler { base, seed } => {
            let m = embed_values(record, base);
            let mut perm: Vec<usize> = (0..m.nrows()).collect();
            perm.shuffle(&mut seed::derived_rng(
                *seed,
                &["shuffle", &record.scenario, &record.patient, record.feature.name()],
            ));
            DMatrix::from_fn(m.nrows(), m.ncols(), |t, d| m[(perm[t], d)])
        }
    }
}

/// Embeds one canonical record with a reference embedder.
pub fn embed_reference(record: &SignalRecord, spec: &EmbedderSpec) -> Result<EmbeddingMatrix> {
    spec.validate(record.len())?;
    let meta = EmbeddingMeta {
        model_id: spec.id(),
        scenario: record.scenario.clone(),
        patient: record.patient.clone(),
        feature: record.feature,
    };
    EmbeddingMatrix::new(embed_values(record, spec), meta)
}

/// Embeddings for every cell of a dataset, keyed by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub model_id: String,
    cells: BTreeMap<CellKey, EmbeddingMatrix>,
}

impl EmbeddingSet {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self { model_id: model_id.into(), cells: BTreeMap::new() }
    }

    pub fn insert(&mut self, m: EmbeddingMatrix) {
        self.cells.insert(m.meta.cell(), m);
    }

    pub fn get(&self, key: &CellKey) -> Option<&EmbeddingMatrix> {
        self.cells.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingMatrix> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// The raw signals viewed as T x 1 embeddings.
    pub fn identity_of(ds: &Dataset) -> Self {
        embed_dataset(ds, &EmbedderSpec::Identity).expect("identity embedding cannot fail on a valid dataset")
    }

    /// Aligns every matrix to `target_len` rows.
    pub fn aligned(&self, target_len: usize) -> Result<Self> {
        let cells = self
            .cells
            .iter()
            .map(|(k, m)| Ok((k.clone(), align_embedding(m, target_len)?)))
            .collect::<Result<_>>()?;
        Ok(Self { model_id: self.model_id.clone(), cells })
    }

    /// Checks that every present dataset cell has an embedding with the
    /// dataset's length.
    pub fn check_covers(&self, ds: &Dataset) -> Result<()> {
        let t = ds.manifest.canonical_length;
        for r in ds.records() {
            let key = r.key();
            let m = self.get(&key).ok_or_else(|| EmbedError::MissingCell(key.clone()))?;
            if m.rows() != t {
                return Err(EmbedError::RowMismatch { cell: key, rows: m.rows(), expected: t });
            }
        }
        Ok(())
    }
}

/// Embeds every record of a canonical dataset. Cells are processed in
/// parallel; all randomness is derived per cell.
pub fn embed_dataset(ds: &Dataset, spec: &EmbedderSpec) -> Result<EmbeddingSet> {
    let records: Vec<&SignalRecord> = ds.records().collect();
    let mats = records.par_iter().map(|r| embed_reference(r, spec)).collect::<Result<Vec<_>>>()?;
    let mut set = EmbeddingSet::new(spec.id());
    for m in mats {
        set.insert(m);
    }
    Ok(set)
}
