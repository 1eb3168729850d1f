//! Assessment artifact: provenance, the five battery reports, thresholds and
//! verdicts, plus JSON, Markdown and SVG renderings.

mod markdown;
mod svg;

pub use markdown::render_markdown;
pub use svg::{render_svg, Panel};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::metrics::{
    DecodingReport, DynamicsReport, EntanglementReport, MetricsSuite, ReconstructionReport, ScenarioReport,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{report} report was computed on dataset {found}, expected {expected}")]
    ProvenanceMismatch { report: &'static str, expected: String, found: String },
    #[error("unknown panel `{0}` (expected one of: entanglement, reconstruction, dynamics, scenarios, decoding)")]
    UnknownPanel(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error("malformed report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Disentanglement passes when the embedded mean decoding AUC exceeds
    /// this.
    pub decoding_auc: f64,
    /// Temporal preservation passes when embedded smoothness is at least raw
    /// smoothness minus this margin. Provisional default.
    pub temporal_margin: f64,
    /// Scenario discrimination passes when embedded mean cross-scenario
    /// similarity is at most raw plus this margin. Provisional default.
    pub scenario_margin: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { decoding_auc: 0.9, temporal_margin: 0.2, scenario_margin: 0.1 }
    }
}

impl Thresholds {
    /// Names of thresholds that are working defaults rather than
    /// established bars.
    pub const PROVISIONAL: [&'static str; 2] = ["temporal_margin", "scenario_margin"];

    pub fn validate(&self) -> Result<()> {
        if ![self.decoding_auc, self.temporal_margin, self.scenario_margin].iter().all(|v| v.is_finite()) {
            return Err(ReportError::InvalidThresholds("all thresholds must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.decoding_auc) {
            return Err(ReportError::InvalidThresholds("decoding_auc must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The inputs needed for the rule are missing (e.g. a single scenario).
    Undetermined,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub disentanglement: Verdict,
    pub temporal_preservation: Verdict,
    pub scenario_discrimination: Verdict,
}

impl Verdicts {
    /// Applies the verdict rules to report numbers.
    pub fn evaluate(t: &Thresholds, decoding: &DecodingReport, dynamics: &DynamicsReport, scenarios: &ScenarioReport) -> Self {
        let scenario_discrimination = match (scenarios.mean_off_diagonal.raw, scenarios.mean_off_diagonal.embedded) {
            (Some(raw), Some(emb)) => Verdict::from_bool(emb <= raw + t.scenario_margin),
            _ => Verdict::Undetermined,
        };
        Self {
            disentanglement: Verdict::from_bool(decoding.mean.embedded > t.decoding_auc),
            temporal_preservation: Verdict::from_bool(
                dynamics.mean_smoothness.embedded >= dynamics.mean_smoothness.raw - t.temporal_margin,
            ),
            scenario_discrimination,
        }
    }

    pub fn all_pass(&self) -> bool {
        [self.disentanglement, self.temporal_preservation, self.scenario_discrimination]
            .iter()
            .all(|v| *v == Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub model_id: String,
    /// SHA-256 of the canonical run configuration.
    pub config_digest: String,
    pub dataset_digest: String,
    pub seeds: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub thresholds: Thresholds,
    pub provisional_thresholds: Vec<String>,
    pub verdicts: Verdicts,
    pub entanglement: EntanglementReport,
    pub reconstruction: ReconstructionReport,
    pub dynamics: DynamicsReport,
    pub scenarios: ScenarioReport,
    pub decoding: DecodingReport,
}

impl AssessmentReport {
    /// Recomputes the verdicts from the contained numbers.
    pub fn recompute_verdicts(&self) -> Verdicts {
        Verdicts::evaluate(&self.thresholds, &self.decoding, &self.dynamics, &self.scenarios)
    }
}

/// Combines the battery reports into one artifact. Every report must come
/// from the dataset named in `provenance`.
pub fn assemble(suite: MetricsSuite, thresholds: Thresholds, provenance: Provenance) -> Result<AssessmentReport> {
    thresholds.validate()?;
    let digests = [
        ("entanglement", &suite.entanglement.dataset_digest),
        ("reconstruction", &suite.reconstruction.dataset_digest),
        ("dynamics", &suite.dynamics.dataset_digest),
        ("scenario", &suite.scenarios.dataset_digest),
        ("decoding", &suite.decoding.dataset_digest),
    ];
    for (report, found) in digests {
        if *found != provenance.dataset_digest {
            return Err(ReportError::ProvenanceMismatch {
                report,
                expected: provenance.dataset_digest.clone(),
                found: found.clone(),
            });
        }
    }
    let verdicts = Verdicts::evaluate(&thresholds, &suite.decoding, &suite.dynamics, &suite.scenarios);
    Ok(AssessmentReport {
        schema_version: SCHEMA_VERSION,
        provenance,
        thresholds,
        provisional_thresholds: Thresholds::PROVISIONAL.iter().map(|s| s.to_string()).collect(),
        verdicts,
        entanglement: suite.entanglement,
        reconstruction: suite.reconstruction,
        dynamics: suite.dynamics,
        scenarios: suite.scenarios,
        decoding: suite.decoding,
    })
}

fn sorted(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let entries: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sorted(v))).collect();
            Value::Object(entries.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Canonical JSON: object keys sorted, shortest round-trip float
/// formatting, two-space indentation, trailing newline.
pub fn render_json(report: &AssessmentReport) -> String {
    let v = sorted(serde_json::to_value(report).expect("report serialises"));
    serde_json::to_string_pretty(&v).expect("value serialises") + "\n"
}

pub fn parse_json(text: &str) -> Result<AssessmentReport> {
    let r: AssessmentReport = serde_json::from_str(text)?;
    if r.schema_version != SCHEMA_VERSION {
        return Err(ReportError::Schema(r.schema_version));
    }
    Ok(r)
}

pub const JSON_FILE: &str = "assessment.json";
pub const MARKDOWN_FILE: &str = "assessment.md";

pub fn figure_file(panel: Panel) -> String {
    format!("fig_{}.svg", panel.name())
}

/// Writes `assessment.json`, `assessment.md` and one SVG per panel into
/// `dir`, each atomically. Returns the written paths.
pub fn write_outputs(report: &AssessmentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![
        (dir.join(JSON_FILE), render_json(report)),
        (dir.join(MARKDOWN_FILE), render_markdown(report)),
    ];
    for panel in Panel::ALL {
        files.push((dir.join(figure_file(panel)), render_svg(report, panel)));
    }
    let mut written = Vec::new();
    for (path, body) in files {
        write_atomic(&path, body.as_bytes()).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
