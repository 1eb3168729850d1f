//! Dataset directory layout:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/signals/<scenario>/<patient>.csv   # header: time,<feature>,...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{CellKey, Dataset, ExcludedCell, FeatureId, ForgeError, Manifest, Result, SignalRecord};
use crate::fsutil::write_atomic;
use crate::numbers::fmt_g17;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn signal_path(signal_dir: &Path, scenario: &str, patient: &str) -> PathBuf {
    signal_dir.join(scenario).join(format!("{patient}.csv"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ForgeError + '_ {
    move |source| ForgeError::Io { path: path.to_path_buf(), source }
}

/// Writes the manifest and one CSV per (scenario, patient). Excluded cells
/// are written as empty columns.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    let signals = dir.join("signals");
    for s in &ds.manifest.scenarios {
        for p in &ds.manifest.patients {
            let present: Vec<&SignalRecord> =
                ds.manifest.features.iter().filter_map(|&f| ds.get(s, &p.id, f)).collect();
            let Some(first) = present.first() else {
                continue;
            };
            let times = &first.times;
            if present.iter().any(|r| r.times != *times) {
                return Err(ForgeError::Schema(format!(
                    "features of {s}/{} do not share a time axis; cannot write one table",
                    p.id
                )));
            }
            let mut out = String::from("time");
            for f in &ds.manifest.features {
                out.push(',');
                out.push_str(f.name());
            }
            out.push('\n');
            for (i, t) in times.iter().enumerate() {
                out.push_str(&fmt_g17(*t));
                for &f in &ds.manifest.features {
                    out.push(',');
                    if let Some(r) = ds.get(s, &p.id, f) {
                        out.push_str(&fmt_g17(r.values[i]));
                    }
                }
                out.push('\n');
            }
            let path = signal_path(&signals, s, &p.id);
            write_atomic(&path, out).map_err(io_err(&path))?;
        }
    }
    let mut manifest = serde_json::to_string_pretty(&ds.manifest).expect("manifest serialises");
    let _ = writeln!(manifest);
    let path = dir.join(MANIFEST_FILE);
    write_atomic(&path, manifest).map_err(io_err(&path))
}

#[derive(serde::Deserialize)]
struct RawManifest {
    format_version: u32,
    scenarios: Vec<String>,
    patients: Vec<super::PatientProfile>,
    features: Vec<String>,
    canonical_length: usize,
    seed: u64,
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let raw: RawManifest =
        serde_json::from_str(&text).map_err(|source| ForgeError::Manifest { path: path.to_path_buf(), source })?;
    let features = raw.features.iter().map(|s| s.parse()).collect::<Result<Vec<FeatureId>>>()?;
    for f in FeatureId::ALL {
        if !features.contains(&f) {
            return Err(ForgeError::Schema(format!("manifest {} is missing feature `{f}`", path.display())));
        }
    }
    if raw.canonical_length < 2 {
        return Err(ForgeError::Schema("canonical_length must be at least 2".into()));
    }
    Ok(Manifest {
        format_version: raw.format_version,
        scenarios: raw.scenarios,
        patients: raw.patients,
        features,
        canonical_length: raw.canonical_length,
        seed: raw.seed,
    })
}

/// Reads a dataset exported as CSV tables described by `manifest`.
///
/// A feature column that is entirely blank marks that cell as excluded; a
/// partially blank column is a parse error.
pub fn ingest_csv(signal_dir: &Path, manifest: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest)?;
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for s in &manifest.scenarios {
        for p in &manifest.patients {
            let path = signal_path(signal_dir, s, &p.id);
            let (rs, missing) = read_table(&path, s, &p.id, &manifest.features)?;
            records.extend(rs);
            for f in missing {
                let cell = CellKey::new(s.clone(), p.id.clone(), f);
                log::warn!("cell {cell} has no data in {}", path.display());
                excluded.push(ExcludedCell { cell, reason: "missing from export".into() });
            }
        }
    }
    Dataset::new(manifest, records, excluded)
}

fn read_table(
    path: &Path,
    scenario: &str,
    patient: &str,
    features: &[FeatureId],
) -> Result<(Vec<SignalRecord>, Vec<FeatureId>)> {
    let parse_err = |line: u64, message: String| ForgeError::Parse { path: path.to_path_buf(), line, message };
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.get(0) != Some("time") {
        return Err(ForgeError::Schema(format!("{}: first column must be `time`", path.display())));
    }
    let mut columns: Vec<FeatureId> = Vec::new();
    for name in header.iter().skip(1) {
        let f: FeatureId = name
            .parse()
            .map_err(|_| ForgeError::Schema(format!("{}: unknown feature column `{name}`", path.display())))?;
        if columns.contains(&f) {
            return Err(ForgeError::Schema(format!("{}: duplicate column `{name}`", path.display())));
        }
        columns.push(f);
    }
    for f in features {
        if !columns.contains(f) {
            return Err(ForgeError::Schema(format!("{}: missing feature column `{f}`", path.display())));
        }
    }

    let mut times: Vec<f64> = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); columns.len()];
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        let t: f64 = row[0].trim().parse().map_err(|_| parse_err(line, format!("bad time `{}`", &row[0])))?;
        if !t.is_finite() {
            return Err(parse_err(line, "non-finite time".into()));
        }
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(ForgeError::Gap { path: path.to_path_buf(), line });
            }
        }
        times.push(t);
        for (c, field) in row.iter().skip(1).enumerate() {
            let field = field.trim();
            let v = if field.is_empty() {
                None
            } else {
                let v: f64 = field.parse().map_err(|_| parse_err(line, format!("bad value `{field}`")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("non-finite value `{field}`")));
                }
                Some(v)
            };
            cols[c].push(v);
        }
    }

    let mut records = Vec::new();
    let mut missing = Vec::new();
    for &f in features {
        let c = columns.iter().position(|&x| x == f).expect("checked above");
        let col = &cols[c];
        if col.iter().all(Option::is_none) {
            missing.push(f);
            continue;
        }
        if let Some(i) = col.iter().position(Option::is_none) {
            return Err(parse_err(i as u64 + 2, format!("blank value in column `{f}`")));
        }
        records.push(SignalRecord {
            scenario: scenario.to_string(),
            patient: patient.to_string(),
            feature: f,
            times: times.clone(),
            values: col.iter().map(|v| v.expect("checked")).collect(),
        });
    }
    Ok((records, missing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_dataset, GeneratorConfig};

    fn small() -> Dataset {
        generate_dataset(&GeneratorConfig { patients_per_scenario: 2, duration_s: 60.0, seed: 3, ..Default::default() })
            .unwrap()
    }

    #[test]
    fn write_then_ingest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        write_dataset(&ds, dir.path()).unwrap();
        let back = ingest_csv(&dir.path().join("signals"), &dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn decreasing_time_is_a_gap() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        write_dataset(&ds, dir.path()).unwrap();
        let p = signal_path(&dir.path().join("signals"), "sepsis", &ds.manifest.patients[0].id);
        let text = fs::read_to_string(&p).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(3, 4);
        fs::write(&p, lines.join("\n") + "\n").unwrap();
        let err = ingest_csv(&dir.path().join("signals"), &dir.path().join(MANIFEST_FILE)).unwrap_err();
        assert!(matches!(err, ForgeError::Gap { line: 5, .. }), "{err}");
    }

    #[test]
    fn manifest_missing_a_feature_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        write_dataset(&ds, dir.path()).unwrap();
        let mpath = dir.path().join(MANIFEST_FILE);
        let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&mpath).unwrap()).unwrap();
        m["features"].as_array_mut().unwrap().retain(|f| f != "renal_blood_flow");
        fs::write(&mpath, m.to_string()).unwrap();
        let err = ingest_csv(&dir.path().join("signals"), &mpath).unwrap_err();
        assert!(matches!(&err, ForgeError::Schema(m) if m.contains("renal_blood_flow")), "{err}");
    }

    #[test]
    fn blank_column_is_reported_as_excluded() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        write_dataset(&ds, dir.path()).unwrap();
        let pid = ds.manifest.patients[1].id.clone();
        let p = signal_path(&dir.path().join("signals"), "hemorrhage", &pid);
        let text = fs::read_to_string(&p).unwrap();
        // blank out heart_rate (column index 4)
        let rewritten: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let mut f: Vec<&str> = l.split(',').collect();
                if i > 0 {
                    f[4] = "";
                }
                f.join(",") + "\n"
            })
            .collect();
        fs::write(&p, rewritten).unwrap();
        let back = ingest_csv(&dir.path().join("signals"), &dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back.excluded.len(), 1);
        assert_eq!(back.excluded[0].cell, CellKey::new("hemorrhage", pid, FeatureId::HeartRate));
    }

    #[test]
    fn unknown_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        write_dataset(&ds, dir.path()).unwrap();
        let p = signal_path(&dir.path().join("signals"), "sepsis", &ds.manifest.patients[0].id);
        let text = fs::read_to_string(&p).unwrap().replacen("heart_rate", "pulse", 1);
        fs::write(&p, text).unwrap();
        let err = ingest_csv(&dir.path().join("signals"), &dir.path().join(MANIFEST_FILE)).unwrap_err();
        assert!(matches!(&err, ForgeError::Schema(m) if m.contains("pulse")), "{err}");
    }

    #[test]
    fn written_text_is_reproducible() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_dataset(&small(), a.path()).unwrap();
        write_dataset(&small(), b.path()).unwrap();
        let p = |d: &Path| signal_path(&d.join("signals"), "multi_organ_failure", "patient_02");
        assert_eq!(fs::read(p(a.path())).unwrap(), fs::read(p(b.path())).unwrap());
        assert_eq!(fs::read(a.path().join(MANIFEST_FILE)).unwrap(), fs::read(b.path().join(MANIFEST_FILE)).unwrap());
    }
}
