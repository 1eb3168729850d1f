//! Assessment batteries comparing raw signals with their embeddings.
//!
//! Every battery runs the same code on two views of the data: the embedding
//! set under test and the raw signals viewed as `T x 1` identity embeddings.
//! Identity embeddings therefore reproduce the raw numbers exactly.
//!
//! Work is spread over cells and feature pairs with rayon; all randomness is
//! drawn from seeds derived per cell, so results do not depend on the
//! schedule.

mod decoding;
mod dynamics;
mod entanglement;
mod reconstruction;
mod scenarios;

pub use decoding::{feature_decoding, DecodingPair, DecodingReport};
pub use dynamics::{temporal_dynamics, trajectory_smoothness, DynamicsEntry, DynamicsReport};
pub use entanglement::{feature_entanglement, EntanglementMode, EntanglementReport, PairDistribution, ScenarioEntanglement};
pub use reconstruction::{reconstruction_assessment, ReconstructionReport};
pub use scenarios::{scenario_similarity, ScenarioReport};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, EmbeddingMatrix, EmbeddingSet};
use crate::numerics::{LogisticOptions, NumericsError, DEFAULT_RIDGE_LAMBDA};
use crate::scenario::{CellKey, Dataset, FeatureId};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dataset is not in canonical form: {0}")]
    NotCanonical(String),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error("{context}: {source}")]
    Numerics { context: String, source: NumericsError },
    #[error("trajectory has zero magnitude")]
    ZeroMagnitude,
    #[error("too few samples for {context}: need {needed}, got {got}")]
    TooFewSamples { context: String, needed: usize, got: usize },
    #[error("invalid metrics config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

pub(crate) trait Context<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, NumericsError> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| MetricsError::Numerics { context: ctx(), source })
    }
}

/// The same quantity measured on raw signals and on embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paired<T> {
    pub raw: T,
    pub embedded: T,
}

impl<T> Paired<T> {
    pub fn new(raw: T, embedded: T) -> Self {
        Self { raw, embedded }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Paired<U> {
        Paired { raw: f(self.raw), embedded: f(self.embedded) }
    }

    pub fn as_ref(&self) -> Paired<&T> {
        Paired { raw: &self.raw, embedded: &self.embedded }
    }
}

/// Square matrix with undefined entries as `None` (serialised as `null`).
pub type Matrix = Vec<Vec<Option<f64>>>;

pub(crate) fn empty_matrix(n: usize) -> Matrix {
    vec![vec![None; n]; n]
}

/// Mean and population standard deviation of the defined off-diagonal
/// entries of a symmetric matrix (upper triangle).
pub fn off_diagonal_stats(m: &Matrix) -> Option<(f64, f64)> {
    let vals: Vec<f64> = (0..m.len()).flat_map(|i| ((i + 1)..m.len()).filter_map(move |j| m[i][j])).collect();
    if vals.is_empty() {
        return None;
    }
    Some((crate::numerics::mean(&vals), crate::numerics::population_std(&vals)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Decoding window length in timesteps; windows are taken at this stride.
    pub window: usize,
    /// Permutations in the smoothness baseline.
    pub n_perm: usize,
    pub cv_folds: usize,
    pub train_fraction: f64,
    /// Cumulative explained variance that sets dimensionality.
    pub variance_threshold: f64,
    pub ridge_lambda: f64,
    pub logistic: LogisticOptions,
    pub entanglement_mode: EntanglementMode,
    /// Run dynamics and scenario analyses per patient instead of on
    /// patient-averaged signals.
    pub per_patient: bool,
    /// Shuffle decoding labels before splitting (null control).
    pub permute_labels: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            window: 50,
            n_perm: 1000,
            cv_folds: 5,
            train_fraction: 0.8,
            variance_threshold: 0.9,
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            logistic: LogisticOptions::default(),
            entanglement_mode: EntanglementMode::default(),
            per_patient: false,
            permute_labels: false,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MetricsError::InvalidConfig(m.into()));
        if self.window < 1 {
            return bad("window must be at least 1");
        }
        if self.n_perm < 1 {
            return bad("n_perm must be at least 1");
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return bad("variance_threshold must lie in (0, 1]");
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return bad("ridge_lambda must be nonnegative");
        }
        if !(self.logistic.l2 >= 0.0 && self.logistic.tol > 0.0) {
            return bad("logistic.l2 must be nonnegative and logistic.tol positive");
        }
        Ok(())
    }
}

/// Results of all five batteries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSuite {
    pub entanglement: EntanglementReport,
    pub reconstruction: ReconstructionReport,
    pub dynamics: DynamicsReport,
    pub scenarios: ScenarioReport,
    pub decoding: DecodingReport,
}

/// Runs every battery with one base seed.
pub fn run_all(ds: &Dataset, emb: &EmbeddingSet, cfg: &MetricsConfig, seed: u64) -> Result<MetricsSuite> {
    Ok(MetricsSuite {
        entanglement: feature_entanglement(ds, emb, cfg)?,
        reconstruction: reconstruction_assessment(ds, emb, cfg, seed)?,
        dynamics: temporal_dynamics(ds, emb, cfg, seed)?,
        scenarios: scenario_similarity(ds, emb, cfg)?,
        decoding: feature_decoding(ds, emb, cfg, seed)?,
    })
}

/// Both views of a validated input pair.
pub(crate) struct Views<'a> {
    pub ds: &'a Dataset,
    pub raw: EmbeddingSet,
    pub embedded: &'a EmbeddingSet,
    pub digest: String,
}

impl<'a> Views<'a> {
    pub fn new(ds: &'a Dataset, embedded: &'a EmbeddingSet, cfg: &MetricsConfig) -> Result<Self> {
        cfg.validate()?;
        if !ds.is_canonical() {
            return Err(MetricsError::NotCanonical(format!(
                "records must all have length {}",
                ds.manifest.canonical_length
            )));
        }
        embedded.check_covers(ds)?;
        Ok(Self { ds, raw: EmbeddingSet::identity_of(ds), embedded, digest: ds.digest() })
    }

    pub fn pair(&self) -> Paired<&EmbeddingSet> {
        Paired::new(&self.raw, self.embedded)
    }

    pub fn features(&self) -> &[FeatureId] {
        &self.ds.manifest.features
    }

    pub fn scenarios(&self) -> &[String] {
        &self.ds.manifest.scenarios
    }

    pub fn patient_ids(&self) -> Vec<&str> {
        self.ds.manifest.patients.iter().map(|p| p.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.ds.manifest.canonical_length
    }

    /// Looks up a cell that is present in the dataset.
    pub fn cell<'s>(&self, view: &'s EmbeddingSet, s: &str, p: &str, f: FeatureId) -> Option<&'s EmbeddingMatrix> {
        self.ds.get(s, p, f)?;
        view.get(&CellKey::new(s, p, f))
    }

    /// Element-wise mean of the present cells of `patients` for one feature.
    pub fn averaged(&self, view: &EmbeddingSet, s: &str, patients: &[&str], f: FeatureId) -> Result<Option<DMatrix<f64>>> {
        let mut acc: Option<DMatrix<f64>> = None;
        let mut n = 0usize;
        for p in patients {
            let Some(m) = self.cell(view, s, p, f) else { continue };
            match &mut acc {
                None => acc = Some(m.data.clone()),
                Some(a) if a.shape() == m.data.shape() => *a += &m.data,
                Some(a) => {
                    return Err(MetricsError::Shape(format!(
                        "{}: {}x{} but other patients have {}x{}",
                        CellKey::new(s, *p, f),
                        m.rows(),
                        m.cols(),
                        a.nrows(),
                        a.ncols()
                    )))
                }
            }
            n += 1;
        }
        Ok(acc.map(|a| if n > 1 { a / n as f64 } else { a }))
    }
}
