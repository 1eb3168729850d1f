//! Embedding interchange files.
//!
//! Each cell is a headerless CSV (`T` lines of `D` comma-separated values,
//! LF endings, every line terminated) plus a JSON sidecar
//! `<stem>.meta.json`:
//!
//! ```json
//! {"format_version":1,"model_id":"m","scenario":"s","patient":"p",
//!  "feature":"heart_rate","rows":1000,"cols":64}
//! ```
//!
//! Unknown sidecar fields are ignored so producers can attach extra detail.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingMatrix, EmbeddingMeta, EmbeddingSet, Result};
use crate::fsutil::write_atomic;
use crate::numbers::fmt_g17;
use crate::scenario::{CellKey, FeatureId};

pub const EMBEDDING_FORMAT_VERSION: u32 = 1;
const META_SUFFIX: &str = ".meta.json";

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    model_id: String,
    scenario: String,
    patient: String,
    feature: FeatureId,
    rows: usize,
    cols: usize,
}

/// File name used for a cell inside an embedding directory.
pub fn embedding_file_name(cell: &CellKey) -> String {
    format!("{}__{}__{}.csv", cell.scenario, cell.patient, cell.feature.name())
}

/// `x.csv` -> `x.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}{META_SUFFIX}"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbedError + '_ {
    move |source| EmbedError::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> EmbedError {
    EmbedError::Format { path: path.to_path_buf(), message: message.into() }
}

/// Writes the matrix CSV and its sidecar.
pub fn write_embedding(e: &EmbeddingMatrix, csv_path: &Path) -> Result<()> {
    let mut body = String::with_capacity(e.rows() * e.cols() * 24);
    for t in 0..e.rows() {
        for d in 0..e.cols() {
            if d > 0 {
                body.push(',');
            }
            body.push_str(&fmt_g17(e.data[(t, d)]));
        }
        body.push('\n');
    }
    let side = Sidecar {
        format_version: EMBEDDING_FORMAT_VERSION,
        model_id: e.meta.model_id.clone(),
        scenario: e.meta.scenario.clone(),
        patient: e.meta.patient.clone(),
        feature: e.meta.feature,
        rows: e.rows(),
        cols: e.cols(),
    };
    let side_json = serde_json::to_string_pretty(&side).expect("sidecar serialises") + "\n";
    write_atomic(csv_path, body.as_bytes()).map_err(io_err(csv_path))?;
    let sp = sidecar_path(csv_path);
    write_atomic(&sp, side_json.as_bytes()).map_err(io_err(&sp))
}

fn parse_matrix(path: &Path, text: &str) -> Result<(usize, usize, Vec<f64>)> {
    if text.is_empty() {
        return Err(format_err(path, "empty file"));
    }
    if !text.ends_with('\n') {
        return Err(format_err(path, "last line is not terminated (truncated file?)"));
    }
    let mut cols = None;
    let mut rows = 0;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("line {line_no}: cannot parse {field:?} as a number")))?;
            if !v.is_finite() {
                return Err(format_err(path, format!("line {line_no}: non-finite value {field:?}")));
            }
            values.push(v);
        }
        let n = values.len() - before;
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(format_err(path, format!("line {line_no}: {n} value(s), expected {c}")));
            }
            _ => {}
        }
        rows += 1;
    }
    Ok((rows, cols.unwrap_or(0), values))
}

/// Reads a matrix CSV and its sidecar, cross-checking the declared shape.
pub fn read_embedding(csv_path: &Path) -> Result<EmbeddingMatrix> {
    let sp = sidecar_path(csv_path);
    let side_text = fs::read_to_string(&sp).map_err(io_err(&sp))?;
    let side: Sidecar = serde_json::from_str(&side_text).map_err(|e| format_err(&sp, e.to_string()))?;
    if side.format_version != EMBEDDING_FORMAT_VERSION {
        return Err(format_err(&sp, format!("unsupported format_version {}", side.format_version)));
    }
    let text = fs::read_to_string(csv_path).map_err(io_err(csv_path))?;
    let (rows, cols, row_major) = parse_matrix(csv_path, &text)?;
    if rows != side.rows || cols != side.cols {
        return Err(EmbedError::MetadataMismatch {
            path: csv_path.to_path_buf(),
            message: format!(
                "cell {}: sidecar declares {}x{}, file holds {rows}x{cols}",
                CellKey::new(side.scenario.clone(), side.patient.clone(), side.feature),
                side.rows,
                side.cols
            ),
        });
    }
    let meta = EmbeddingMeta {
        model_id: side.model_id,
        scenario: side.scenario,
        patient: side.patient,
        feature: side.feature,
    };
    EmbeddingMatrix::new(DMatrix::from_row_slice(rows, cols, &row_major), meta)
}

/// Writes every cell of `set` into `dir`.
pub fn write_embedding_set(set: &EmbeddingSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for m in set.iter() {
        write_embedding(m, &dir.join(embedding_file_name(&m.meta.cell())))?;
    }
    Ok(())
}

/// Reads every `*.csv` with a sidecar in `dir`. All files must share one
/// model id.
pub fn read_embedding_set(dir: &Path) -> Result<EmbeddingSet> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut set: Option<EmbeddingSet> = None;
    for p in paths {
        let m = read_embedding(&p)?;
        let set = set.get_or_insert_with(|| EmbeddingSet::new(m.meta.model_id.clone()));
        if m.meta.model_id != set.model_id {
            return Err(EmbedError::MetadataMismatch {
                path: p,
                message: format!("model_id {:?} differs from {:?}", m.meta.model_id, set.model_id),
            });
        }
        set.insert(m);
    }
    set.ok_or_else(|| format_err(dir, "no embedding files found"))
}
