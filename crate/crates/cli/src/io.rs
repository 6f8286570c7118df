//! Atomic file output and CSV helpers.

use std::io::Write;
use std::path::Path;

use mlsvgd::Points;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::format("<csv>", e))?;
    }
    w.into_inner().map_err(|e| CliError::format("<csv>", e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::format(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| CliError::format(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::format(path, e)))
        .collect()
}

/// One row per point, columns `theta_0 … theta_{d-1}`.
pub fn write_points(path: &Path, points: &Points) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..points.dim()).map(|k| format!("theta_{k}")).collect();
    w.write_record(&header).map_err(|e| CliError::format(path, e))?;
    for row in points.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| CliError::format(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::format(path, e))?;
    write_atomic(path, &bytes)
}

/// Reads a headered CSV of numbers into points.
pub fn read_points(path: &Path) -> Result<Points> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    let dim = r.headers().map_err(|e| CliError::format(path, e))?.len();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        for field in rec.iter() {
            data.push(field.trim().parse::<f64>().map_err(|e| CliError::format(path, e))?);
        }
    }
    Points::new(dim, data).map_err(|e| CliError::format(path, e))
}
