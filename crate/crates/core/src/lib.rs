//! Representation probing for time-series foundation models on physiological
//! signals.
//!
//! The crate is organised as a pipeline:
//!
//! - [`scenario`] builds or ingests multi-feature vital-sign datasets and puts
//!   them into canonical form (fixed length, z-scored).
//! - [`embed`] turns canonical signals into per-timestep embedding matrices,
//!   either through reference embedders with known pathologies or by reading
//!   matrices exported from an external model.
//! - [`numerics`] holds the statistical kernels (correlation, PCA, ridge,
//!   logistic regression, AUC, splitting).
//! - [`metrics`] runs the assessment batteries comparing raw signals with
//!   their embeddings.
//! - [`report`] assembles the batteries into a versioned report with verdicts
//!   and renders it as JSON, Markdown and SVG.

pub mod embed;
pub mod fsutil;
pub mod metrics;
pub mod numbers;
pub mod numerics;
pub mod report;
pub mod scenario;
pub mod seed;

pub use embed::{EmbedError, EmbedderSpec, EmbeddingMatrix, EmbeddingMeta, EmbeddingSet};
pub use metrics::{
    DecodingReport, DynamicsReport, EntanglementReport, MetricsConfig, MetricsError, MetricsSuite,
    ReconstructionReport, ScenarioReport,
};
pub use numerics::NumericsError;
pub use report::{AssessmentReport, Panel, ReportError, Thresholds, Verdict, Verdicts};
pub use scenario::{
    CellKey, Dataset, FeatureId, ForgeError, GeneratorConfig, Manifest, PatientProfile,
    ScenarioKind, Sex, SignalRecord,
};

/// Version string stamped into report provenance.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
