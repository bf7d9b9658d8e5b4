//! Shared harness plumbing: instance loading and report writing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use obm::Instance;

/// Load every `*.json` instance under `path` (a directory or a single
/// file), sorted by file stem so downstream reports are deterministic.
pub fn load_instances(path: &Path) -> Result<Vec<(String, Instance)>> {
    let mut files: Vec<PathBuf> = if path.is_dir() {
        fs::read_dir(path)
            .with_context(|| format!("reading {path:?}"))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect()
    } else {
        vec![path.to_path_buf()]
    };
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for file in files {
        let id = file
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("instance")
            .to_string();
        let inst = Instance::read_json(&file).with_context(|| format!("loading {file:?}"))?;
        out.push((id, inst));
    }
    Ok(out)
}

/// Write rows (already stringly-typed) under a header to `<out>/<name>`.
pub fn write_csv(out_dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    let mut writer = csv::Writer::from_path(&path).with_context(|| format!("writing {name}"))?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(path)
}

/// Fixed-width decimal used across reports so reruns are byte-identical.
pub fn fmt(v: f64) -> String {
    format!("{v:.9}")
}
