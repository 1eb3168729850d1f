//! Parametric surrogate for a physiology engine.
//!
//! Each scenario template assigns every feature a closed-form trend shape.
//! A patient's profile sets the baselines and the trend magnitude; on top of
//! the trend sit a feature-specific rhythm and Gaussian measurement noise, both
//! scaled by `noise_level`.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize};

use super::{
    Dataset, FeatureId, ForgeError, Manifest, PatientProfile, Result, Sex, SignalRecord, DEFAULT_CANONICAL_LENGTH,
    FORMAT_VERSION,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Hemorrhage,
    Sepsis,
    MultiOrganFailure,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::Hemorrhage => "hemorrhage",
            Template::Sepsis => "sepsis",
            Template::MultiOrganFailure => "multi_organ_failure",
        }
    }

    fn from_name(s: &str) -> Option<Template> {
        [Template::Hemorrhage, Template::Sepsis, Template::MultiOrganFailure]
            .into_iter()
            .find(|t| t.name() == s)
    }
}

/// A scenario to simulate. In JSON either a bare template name
/// (`"sepsis"`) or `{"name": "...", "template": "..."}` for variants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub template: Template,
}

impl ScenarioSpec {
    pub fn of(template: Template) -> Self {
        Self { name: template.name().to_string(), template }
    }
}

impl<'de> Deserialize<'de> for ScenarioSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bare(String),
            Full { name: String, template: Template },
        }
        match Repr::deserialize(d)? {
            Repr::Bare(s) => Template::from_name(&s)
                .map(ScenarioSpec::of)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown scenario template `{s}`"))),
            Repr::Full { name, template } => Ok(ScenarioSpec { name, template }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default = "default_patients")]
    pub patients_per_scenario: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_noise")]
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_length")]
    pub canonical_length: usize,
}

fn default_scenarios() -> Vec<ScenarioSpec> {
    vec![
        ScenarioSpec::of(Template::Hemorrhage),
        ScenarioSpec::of(Template::Sepsis),
        ScenarioSpec::of(Template::MultiOrganFailure),
    ]
}
fn default_patients() -> usize {
    5
}
fn default_duration() -> f64 {
    1200.0
}
fn default_rate() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    1.0
}
fn default_length() -> usize {
    DEFAULT_CANONICAL_LENGTH
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            scenarios: default_scenarios(),
            patients_per_scenario: default_patients(),
            duration_s: default_duration(),
            sample_rate_hz: default_rate(),
            noise_level: default_noise(),
            seed: 0,
            canonical_length: default_length(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ForgeError::InvalidConfig(m.to_string()));
        if self.scenarios.is_empty() {
            return bad("at least one scenario is required");
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty()) {
            return bad("scenario names must be nonempty and unique");
        }
        if self.patients_per_scenario < 1 {
            return bad("patients_per_scenario must be at least 1");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be positive");
        }
        if self.sample_count() < 2 {
            return bad("duration_s * sample_rate_hz must yield at least 2 samples");
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise_level must be nonnegative");
        }
        if self.canonical_length < 2 {
            return bad("canonical_length must be at least 2");
        }
        Ok(())
    }

    fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// `1 - exp(-u / tau)`
    Saturating,
    /// Logistic step centred at `tau`, shifted to start at zero.
    Sigmoid,
    /// `(u / tau) exp(1 - u / tau)`, peak 1 at `u = tau`.
    Transient,
    /// Linear from onset to end of episode.
    Ramp,
}

#[derive(Debug, Clone, Copy)]
struct Trend {
    amplitude: f64,
    shape: Shape,
    tau: f64,
    delay: f64,
}

const fn tr(amplitude: f64, shape: Shape, tau: f64, delay: f64) -> Trend {
    Trend { amplitude, shape, tau, delay }
}

use Shape::*;

/// Per-feature trends in A-G order; `tau` and `delay` are fractions of the
/// episode duration, `amplitude` is relative to baseline at full severity.
fn trends(t: Template) -> (f64, [Trend; 7]) {
    match t {
        Template::Hemorrhage => (
            0.10,
            [
                tr(-0.40, Saturating, 0.30, 0.00),
                tr(-0.15, Transient, 0.20, 0.05),
                tr(-0.50, Saturating, 0.20, 0.00),
                tr(0.60, Saturating, 0.25, 0.02),
                tr(-0.20, Ramp, 1.00, 0.10),
                tr(-0.45, Sigmoid, 0.25, 0.05),
                tr(0.40, Sigmoid, 0.35, 0.10),
            ],
        ),
        Template::Sepsis => (
            0.05,
            [
                tr(-0.30, Ramp, 1.00, 0.15),
                tr(0.30, Saturating, 0.40, 0.00),
                tr(-0.30, Sigmoid, 0.30, 0.10),
                tr(0.50, Sigmoid, 0.20, 0.00),
                tr(0.35, Transient, 0.30, 0.05),
                tr(-0.35, Ramp, 1.00, 0.20),
                tr(0.70, Saturating, 0.30, 0.00),
            ],
        ),
        Template::MultiOrganFailure => (
            0.08,
            [
                tr(-0.35, Ramp, 1.00, 0.00),
                tr(-0.35, Sigmoid, 0.40, 0.10),
                tr(0.40, Ramp, 1.00, 0.20),
                tr(-0.20, Transient, 0.35, 0.05),
                tr(-0.40, Sigmoid, 0.30, 0.00),
                tr(-0.60, Saturating, 0.25, 0.05),
                tr(0.30, Transient, 0.25, 0.15),
            ],
        ),
    }
}

fn shape_value(shape: Shape, u: f64, tau: f64, span: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    match shape {
        Saturating => 1.0 - (-u / tau).exp(),
        Sigmoid => {
            let w = tau / 4.0;
            let s = |v: f64| 1.0 / (1.0 + (-(v - tau) / w).exp());
            let s0 = s(0.0);
            (s(u) - s0) / (1.0 - s0)
        }
        Transient => (u / tau) * (1.0 - u / tau).exp(),
        Ramp => (u / span).min(1.0),
    }
}

/// Rhythm cycles per episode, A-G. Distinct multiples of 20, so the rhythms
/// are mutually orthogonal and complete whole cycles in each twentieth of
/// the episode.
const CYCLES: [f64; 7] = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0];
const OSC_AMPLITUDE: f64 = 0.02;
const NOISE_SD: f64 = 0.004;

fn baseline(f: FeatureId, p: &PatientProfile) -> f64 {
    let da = p.age - 45.0;
    let female = p.sex == Sex::Female;
    let metabolic = (1.0 - 0.002 * da) * if female { 0.85 } else { 1.0 };
    match f {
        FeatureId::ArterialPressure => 93.0 + 0.25 * da - if female { 3.0 } else { 0.0 },
        FeatureId::Co2ProductionRate => 200.0 * metabolic,
        FeatureId::CentralVenousPressure => 7.0 + 0.02 * da,
        FeatureId::HeartRate => 72.0 - 0.1 * da + if female { 5.0 } else { 0.0 },
        FeatureId::OxygenConsumptionRate => 250.0 * metabolic,
        FeatureId::RenalBloodFlow => 1.2 * (1.0 - 0.004 * da) * if female { 0.9 } else { 1.0 },
        FeatureId::RespirationRate => 14.0 + 0.02 * da,
    }
}

fn sample_patients(cfg: &GeneratorConfig) -> Vec<PatientProfile> {
    let mut rng = seed::derived_rng(cfg.seed, &["patients"]);
    let width = cfg.patients_per_scenario.to_string().len().max(2);
    (0..cfg.patients_per_scenario)
        .map(|i| PatientProfile {
            id: format!("patient_{:0width$}", i + 1),
            age: rng.random_range(18..=90) as f64,
            sex: if rng.random_bool(0.5) { Sex::Female } else { Sex::Male },
            severity: rng.random_range(0.0..=1.0),
        })
        .collect()
}

/// Evaluates the noise-free part of one cell on `times`.
fn trend_values(template: Template, f: FeatureId, p: &PatientProfile, duration: f64, times: &[f64]) -> Vec<f64> {
    let (onset, table) = trends(template);
    let trend = table[f.index()];
    let base = baseline(f, p);
    let magnitude = 0.3 + 0.7 * p.severity;
    let start = onset + trend.delay;
    times
        .iter()
        .map(|&t| {
            let u = t / duration - start;
            base * (1.0 + magnitude * trend.amplitude * shape_value(trend.shape, u, trend.tau, 1.0 - start))
        })
        .collect()
}

/// Simulates every (scenario, patient, feature) cell. Patients are shared
/// across scenarios. Output is raw (not canonical).
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let patients = sample_patients(cfg);
    let n = cfg.sample_count();
    let times: Vec<f64> = (0..n).map(|i| i as f64 / cfg.sample_rate_hz).collect();
    let duration = times[n - 1];

    let mut records = Vec::new();
    for sc in &cfg.scenarios {
        for p in &patients {
            for f in FeatureId::ALL {
                let mut values = trend_values(sc.template, f, p, duration, &times);
                if cfg.noise_level > 0.0 {
                    let base = baseline(f, p);
                    let mut phase_rng = seed::derived_rng(cfg.seed, &["phase", f.name()]);
                    let phase = phase_rng.random_range(0.0..2.0 * PI);
                    let mut rng = seed::derived_rng(cfg.seed, &[&sc.name, &p.id, f.name()]);
                    let jitter: f64 = rng.sample::<f64, _>(StandardNormal) * 0.25;
                    let k = CYCLES[f.index()];
                    for (v, &t) in values.iter_mut().zip(&times) {
                        let osc = OSC_AMPLITUDE * (2.0 * PI * k * t / duration + phase + jitter).sin();
                        let eps: f64 = StandardNormal.sample(&mut rng);
                        *v += cfg.noise_level * base * (osc + NOISE_SD * eps);
                    }
                }
                records.push(SignalRecord {
                    scenario: sc.name.clone(),
                    patient: p.id.clone(),
                    feature: f,
                    times: times.clone(),
                    values,
                });
            }
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        scenarios: cfg.scenarios.iter().map(|s| s.name.clone()).collect(),
        patients,
        features: FeatureId::ALL.to_vec(),
        canonical_length: cfg.canonical_length,
        seed: cfg.seed,
    };
    Dataset::new(manifest, records, Vec::new())
}
