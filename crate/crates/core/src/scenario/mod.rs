//! Synthetic and ingested physiological scenario datasets.
//!
//! A [`Dataset`] holds one [`SignalRecord`] per (scenario, patient, feature)
//! cell plus a [`Manifest`] describing the corpus. Datasets come either from
//! the parametric generator ([`generate_dataset`]) or from CSV exports
//! ([`ingest_csv`]), and are brought to canonical form by [`canonicalize`].

mod canon;
mod generate;
mod io;

pub(crate) use canon::interpolate_uniform as canon_interp;
pub use canon::{canonicalize, normalize_zscore, resample_linear, CanonicalOptions, Normalization, StageOrder};
pub use generate::{generate_dataset, GeneratorConfig, ScenarioSpec, Template};
pub use io::{ingest_csv, signal_path, write_dataset, MANIFEST_FILE};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_CANONICAL_LENGTH: usize = 1000;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("signal too short for interpolation: {len} sample(s), need at least 2")]
    TooShort { len: usize },
    #[error("constant signal (variance below 1e-15){}", cell_suffix(.cell))]
    ConstantSignal { cell: Option<CellKey> },
    #[error("invalid record {cell}: {reason}")]
    InvalidRecord { cell: CellKey, reason: String },
    #[error("parse error in {}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("non-monotone time in {} at line {line}", path.display())]
    Gap { path: PathBuf, line: u64 },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {}: {source}", path.display())]
    Manifest { path: PathBuf, source: serde_json::Error },
}

fn cell_suffix(cell: &Option<CellKey>) -> String {
    cell.as_ref().map(|c| format!(" in {c}")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, ForgeError>;

/// The seven vital signs tracked per patient, in display order A-G.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureId {
    ArterialPressure,
    Co2ProductionRate,
    CentralVenousPressure,
    HeartRate,
    OxygenConsumptionRate,
    RenalBloodFlow,
    RespirationRate,
}

impl FeatureId {
    pub const ALL: [FeatureId; 7] = [
        FeatureId::ArterialPressure,
        FeatureId::Co2ProductionRate,
        FeatureId::CentralVenousPressure,
        FeatureId::HeartRate,
        FeatureId::OxygenConsumptionRate,
        FeatureId::RenalBloodFlow,
        FeatureId::RespirationRate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Single-letter code used on figure axes.
    pub fn code(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureId::ArterialPressure => "arterial_pressure",
            FeatureId::Co2ProductionRate => "co2_production_rate",
            FeatureId::CentralVenousPressure => "central_venous_pressure",
            FeatureId::HeartRate => "heart_rate",
            FeatureId::OxygenConsumptionRate => "oxygen_consumption_rate",
            FeatureId::RenalBloodFlow => "renal_blood_flow",
            FeatureId::RespirationRate => "respiration_rate",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            FeatureId::ArterialPressure | FeatureId::CentralVenousPressure => "mmHg",
            FeatureId::Co2ProductionRate | FeatureId::OxygenConsumptionRate => "mL/min",
            FeatureId::HeartRate | FeatureId::RespirationRate => "1/min",
            FeatureId::RenalBloodFlow => "L/min",
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureId {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ForgeError::Schema(format!("unknown feature name `{s}`")))
    }
}

impl Serialize for FeatureId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Name of a clinical scenario, unique within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioKind(pub String);

impl ScenarioKind {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub id: String,
    pub age: f64,
    pub sex: Sex,
    pub severity: f64,
}

impl PatientProfile {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(ForgeError::Schema("patient with empty id".into()));
        }
        if !(1.0..=100.0).contains(&self.age) {
            return Err(ForgeError::Schema(format!("patient {}: age {} outside 1-100", self.id, self.age)));
        }
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(ForgeError::Schema(format!("patient {}: severity {} outside [0,1]", self.id, self.severity)));
        }
        Ok(())
    }
}

/// Coordinates of one signal cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub scenario: String,
    pub patient: String,
    pub feature: FeatureId,
}

impl CellKey {
    pub fn new(scenario: impl Into<String>, patient: impl Into<String>, feature: FeatureId) -> Self {
        Self { scenario: scenario.into(), patient: patient.into(), feature }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.scenario, self.patient, self.feature)
    }
}

/// One univariate time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub scenario: String,
    pub patient: String,
    pub feature: FeatureId,
    /// Seconds, strictly increasing.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SignalRecord {
    pub fn key(&self) -> CellKey {
        CellKey::new(self.scenario.clone(), self.patient.clone(), self.feature)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(ForgeError::InvalidRecord { cell: self.key(), reason });
        if self.times.len() != self.values.len() {
            return bad(format!("{} times but {} values", self.times.len(), self.values.len()));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return bad(format!("non-finite value at index {i}"));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return bad(format!("time not strictly increasing at index {}", i + 1));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub scenarios: Vec<String>,
    pub patients: Vec<PatientProfile>,
    pub features: Vec<FeatureId>,
    pub canonical_length: usize,
    pub seed: u64,
}

/// A cell that is absent from a dataset, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedCell {
    pub cell: CellKey,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    records: BTreeMap<CellKey, SignalRecord>,
    /// Cells named by the manifest but absent (empty export column, constant
    /// signal, ...). Never silently dropped.
    pub excluded: Vec<ExcludedCell>,
}

impl Dataset {
    /// Builds an in-memory dataset of length-`len` series on the grid
    /// `0, 1, ..., len - 1`, with values from `f(scenario, patient, feature)`
    /// (indices). Patients are named `patient_01`, ... with neutral profiles.
    /// Values are used as given, not normalised.
    pub fn from_fn(
        scenarios: &[&str],
        n_patients: usize,
        len: usize,
        mut f: impl FnMut(usize, usize, FeatureId) -> Vec<f64>,
    ) -> Result<Self> {
        let patients: Vec<PatientProfile> = (0..n_patients)
            .map(|i| PatientProfile { id: format!("patient_{:02}", i + 1), age: 50.0, sex: Sex::Female, severity: 0.5 })
            .collect();
        let times: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let mut records = Vec::new();
        for (si, s) in scenarios.iter().enumerate() {
            for (pi, p) in patients.iter().enumerate() {
                for feature in FeatureId::ALL {
                    records.push(SignalRecord {
                        scenario: s.to_string(),
                        patient: p.id.clone(),
                        feature,
                        times: times.clone(),
                        values: f(si, pi, feature),
                    });
                }
            }
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            scenarios: scenarios.iter().map(|s| s.to_string()).collect(),
            patients,
            features: FeatureId::ALL.to_vec(),
            canonical_length: len,
            seed: 0,
        };
        Dataset::new(manifest, records, Vec::new())
    }

    /// Validates records against the manifest. Every manifest cell must be
    /// either present or listed in `excluded`.
    pub fn new(manifest: Manifest, records: Vec<SignalRecord>, excluded: Vec<ExcludedCell>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &manifest.scenarios {
            if s.is_empty() || !seen.insert(s.as_str()) {
                return Err(ForgeError::Schema(format!("scenario names must be nonempty and unique (`{s}`)")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &manifest.patients {
            p.validate()?;
            if !seen.insert(p.id.as_str()) {
                return Err(ForgeError::Schema(format!("duplicate patient id `{}`", p.id)));
            }
        }
        for f in FeatureId::ALL {
            if !manifest.features.contains(&f) {
                return Err(ForgeError::Schema(format!("manifest is missing feature `{f}`")));
            }
        }
        let mut map = BTreeMap::new();
        for r in records {
            r.validate()?;
            if !manifest.scenarios.contains(&r.scenario) || !manifest.patients.iter().any(|p| p.id == r.patient) {
                return Err(ForgeError::Schema(format!("record {} not named by the manifest", r.key())));
            }
            if map.insert(r.key(), r).is_some() {
                return Err(ForgeError::Schema("duplicate record".into()));
            }
        }
        let ds = Dataset { manifest, records: map, excluded };
        for key in ds.expected_cells() {
            if !ds.records.contains_key(&key) && !ds.excluded.iter().any(|e| e.cell == key) {
                return Err(ForgeError::Schema(format!("cell {key} is neither present nor excluded")));
            }
        }
        Ok(ds)
    }

    /// All cells named by the manifest, in manifest order.
    pub fn expected_cells(&self) -> impl Iterator<Item = CellKey> + '_ {
        self.manifest.scenarios.iter().flat_map(move |s| {
            self.manifest.patients.iter().flat_map(move |p| {
                self.manifest.features.iter().map(move |&f| CellKey::new(s.clone(), p.id.clone(), f))
            })
        })
    }

    /// Present records in manifest order.
    pub fn records(&self) -> impl Iterator<Item = &SignalRecord> + '_ {
        self.manifest.scenarios.iter().flat_map(move |s| {
            self.manifest.patients.iter().flat_map(move |p| {
                self.manifest.features.iter().filter_map(move |&f| self.get(s, &p.id, f))
            })
        })
    }

    pub fn get(&self, scenario: &str, patient: &str, feature: FeatureId) -> Option<&SignalRecord> {
        // BTreeMap lookup needs an owned key; cells are few
        self.records.get(&CellKey::new(scenario, patient, feature))
    }

    pub fn get_cell(&self, key: &CellKey) -> Option<&SignalRecord> {
        self.records.get(key)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True when every present record has the manifest's canonical length.
    pub fn is_canonical(&self) -> bool {
        self.records.values().all(|r| r.len() == self.manifest.canonical_length)
    }

    /// SHA-256 over the manifest and every record's bits, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.manifest).expect("manifest serialises"));
        for r in self.records() {
            h.update(r.key().to_string().as_bytes());
            for v in r.times.iter().chain(&r.values) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for e in &self.excluded {
            h.update(e.cell.to_string().as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
