//! Run configuration and stage commands behind the `embedprobe` binary.
//!
//! A run is four stages, each producing a plain directory under the output
//! root so that external tools can replace any one of them:
//!
//! - `dataset/`: canonical signals (`manifest.json`, `signals/*.csv`)
//! - `embeddings/`: one CSV plus JSON sidecar per cell (reference embedders
//!   only; external embeddings are read in place)
//! - `report/`: `assessment.json`, `assessment.md` and `fig_*.svg`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use embedprobe::embed::{embed_dataset, read_embedding_set, write_embedding_set};
use embedprobe::fsutil::build_dir_atomic;
use embedprobe::report::{self, assemble, Provenance};
use embedprobe::scenario::{canonicalize, generate_dataset, ingest_csv, write_dataset, CanonicalOptions, MANIFEST_FILE};
use embedprobe::{
    AssessmentReport, Dataset, EmbedError, EmbedderSpec, EmbeddingSet, ForgeError, GeneratorConfig, MetricsConfig,
    MetricsError, ReportError, Thresholds,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DATASET_DIR: &str = "dataset";
pub const EMBEDDINGS_DIR: &str = "embeddings";
pub const REPORT_DIR: &str = "report";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<ForgeError> for CliError {
    fn from(e: ForgeError) -> Self {
        match e {
            ForgeError::InvalidConfig(_) => CliError::Config(e.to_string()),
            ForgeError::Io { ref source, .. } if source.kind() != std::io::ErrorKind::NotFound => {
                CliError::Other(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::InvalidSpec(_) => CliError::Config(e.to_string()),
            EmbedError::Io { ref source, .. } if source.kind() != std::io::ErrorKind::NotFound => {
                CliError::Other(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidConfig(_) => CliError::Config(e.to_string()),
            MetricsError::Embedding(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::InvalidThresholds(_) | ReportError::UnknownPanel(_) => CliError::Config(e.to_string()),
            ReportError::ProvenanceMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Synthesise scenarios. The run seed replaces the generator's own seed.
    Generate(GeneratorConfig),
    /// Read CSV tables plus a manifest.
    Ingest { signal_dir: PathBuf, manifest: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSource {
    Reference(EmbedderSpec),
    /// A directory of interchange files written by an external model.
    External { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub canonical: CanonicalOptions,
    pub embedder: EmbeddingSource,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses JSON, naming the offending field path on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner()))
        })
    }

    /// Loads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::Ingest { signal_dir, manifest } = &mut cfg.dataset {
            resolve(signal_dir);
            resolve(manifest);
        }
        if let EmbeddingSource::External { dir } = &mut cfg.embedder {
            resolve(dir);
        }
        if let Some(out) = &mut cfg.output_dir {
            resolve(out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Generate(g) = &self.dataset {
            g.validate()?;
        }
        if self.canonical.length.is_some_and(|l| l < 2) {
            return Err(CliError::Config("canonical.length must be at least 2".into()));
        }
        self.metrics.validate()?;
        self.thresholds.validate()?;
        if self.output_dir.is_none() {
            return Err(CliError::Config("no output directory: set `output_dir` or pass --out".into()));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().expect("validated config has an output directory")
    }

    /// SHA-256 of the canonical JSON form, excluding the output location.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let v = serde_json::to_value(&c).expect("config serialises");
        let text = serde_json::to_string(&v).expect("value serialises");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.output_dir().join(DATASET_DIR)
    }

    pub fn embeddings_dir(&self) -> PathBuf {
        match &self.embedder {
            EmbeddingSource::Reference(_) => self.output_dir().join(EMBEDDINGS_DIR),
            EmbeddingSource::External { dir } => dir.clone(),
        }
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir().join(REPORT_DIR)
    }
}

/// Canonical dataset as written by [`cmd_generate`].
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let dir = cfg.dataset_dir();
    let ds = ingest_csv(&dir.join("signals"), &dir.join(MANIFEST_FILE))?;
    Ok(canonicalize(&ds, &cfg.canonical)?)
}

/// Builds (or ingests) the dataset, canonicalises it and writes it to
/// `<out>/dataset`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let raw = match &cfg.dataset {
        DatasetSource::Generate(g) => generate_dataset(&GeneratorConfig { seed: cfg.seed, ..g.clone() })?,
        DatasetSource::Ingest { signal_dir, manifest } => ingest_csv(signal_dir, manifest)?,
    };
    let ds = canonicalize(&raw, &cfg.canonical)?;
    for c in &ds.excluded {
        log::warn!("excluded {}: {}", c.cell, c.reason);
    }
    let dir = cfg.dataset_dir();
    build_dir_atomic(&dir, |staging| write_dataset(&ds, staging).map_err(CliError::from))?;
    log::info!("wrote {} cells to {}", ds.len(), dir.display());
    Ok(dir)
}

/// Reference embedders write `<out>/embeddings`; external directories are
/// checked against the dataset.
pub fn cmd_embed(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    match &cfg.embedder {
        EmbeddingSource::Reference(spec) => {
            spec.validate(ds.manifest.canonical_length)?;
            let set = embed_dataset(&ds, spec)?;
            let dir = cfg.embeddings_dir();
            build_dir_atomic(&dir, |staging| write_embedding_set(&set, staging).map_err(CliError::from))?;
            log::info!("wrote {} embeddings ({}) to {}", set.len(), set.model_id, dir.display());
            Ok(dir)
        }
        EmbeddingSource::External { dir } => {
            load_embeddings(cfg, &ds)?;
            log::info!("external embeddings in {} cover the dataset", dir.display());
            Ok(dir.clone())
        }
    }
}

fn load_embeddings(cfg: &RunConfig, ds: &Dataset) -> Result<EmbeddingSet> {
    let set = read_embedding_set(&cfg.embeddings_dir())?;
    let set = set.aligned(ds.manifest.canonical_length)?;
    set.check_covers(ds)?;
    Ok(set)
}

/// Runs every battery and writes `<out>/report`.
pub fn cmd_assess(cfg: &RunConfig) -> Result<AssessmentReport> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let emb = load_embeddings(cfg, &ds)?;
    let suite = embedprobe::metrics::run_all(&ds, &emb, &cfg.metrics, cfg.seed)?;
    let provenance = Provenance {
        tool_version: embedprobe::TOOL_VERSION.to_string(),
        model_id: emb.model_id.clone(),
        config_digest: cfg.digest(),
        dataset_digest: ds.digest(),
        seeds: BTreeMap::from([("run".to_string(), cfg.seed)]),
    };
    let r = assemble(suite, cfg.thresholds.clone(), provenance)?;
    let dir = cfg.report_dir();
    build_dir_atomic(&dir, |staging| report::write_outputs(&r, staging).map(|_| ()).map_err(CliError::from))?;
    log::info!("wrote report to {}", dir.display());
    Ok(r)
}

pub fn cmd_all(cfg: &RunConfig) -> Result<AssessmentReport> {
    cmd_generate(cfg)?;
    cmd_embed(cfg)?;
    cmd_assess(cfg)
}
