//! Writing run artifacts to the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use toml::Value;

use crate::error::{CliError, CliResult};
use crate::experiment::{Outcome, Prepared};

pub const MANIFEST: &str = "manifest.toml";
pub const REPORT: &str = "report.toml";
pub const METRICS: &str = "metrics.toml";

fn write(path: PathBuf, contents: &str) -> CliResult<PathBuf> {
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// The resolved configuration plus artifact version, as TOML text.
pub fn manifest(prepared: &Prepared) -> CliResult<String> {
    let mut artifact = toml::Table::new();
    artifact.insert("name".into(), Value::String(env!("CARGO_PKG_NAME").into()));
    artifact.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    let mut doc = toml::Table::new();
    doc.insert("artifact".into(), Value::Table(artifact));
    doc.insert(
        "defaults".into(),
        Value::Array(prepared.defaults.iter().cloned().map(Value::String).collect()),
    );
    doc.insert("config".into(), prepared.config.to_value()?);
    toml::to_string(&doc).map_err(|e| CliError::config(format!("cannot render manifest: {e}")))
}

/// Writes the manifest, every table, the report and the timing metrics.
/// Returns the paths written, manifest first.
pub fn write_artifacts(
    dir: &Path,
    prepared: &Prepared,
    outcome: &Outcome,
    elapsed: Duration,
    threads: usize,
) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut written = vec![write(dir.join(MANIFEST), &manifest(prepared)?)?];
    for (name, table) in &outcome.tables {
        written.push(write(dir.join(name), &table.to_csv())?);
    }
    let report = toml::to_string(&outcome.report).map_err(|e| CliError::config(format!("cannot render report: {e}")))?;
    written.push(write(dir.join(REPORT), &report)?);

    let secs = elapsed.as_secs_f64();
    let mut metrics = toml::Table::new();
    metrics.insert("wall_seconds".into(), Value::Float(secs));
    metrics.insert("threads".into(), Value::Integer(threads as i64));
    metrics.insert("work_units".into(), Value::Integer(outcome.work.min(i64::MAX as u64) as i64));
    let rate = if secs > 0.0 { outcome.work as f64 / secs } else { 0.0 };
    metrics.insert("work_units_per_second".into(), Value::Float(rate));
    let metrics = toml::to_string(&metrics).map_err(|e| CliError::config(e.to_string()))?;
    written.push(write(dir.join(METRICS), &metrics)?);
    Ok(written)
}
