//! Atomic file output and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use railfso::config::{ConfigFile, ResolvedConfig};
use serde::Serialize;

/// Writes `bytes` to `path` through a temporary file in the same directory
/// renamed into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(bytes)
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, G: Serialize> {
    pub config_digest: String,
    pub tool_version: &'static str,
    pub command: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
    pub output: String,
    pub rows: usize,
    pub grids: &'a G,
    pub config: ConfigFile,
}

impl<'a, G: Serialize> RunManifest<'a, G> {
    pub fn new(
        resolved: &ResolvedConfig,
        command: Vec<String>,
        started_at: String,
        out: &Path,
        rows: usize,
        grids: &'a G,
    ) -> Self {
        Self {
            config_digest: resolved.digest(),
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            started_at,
            finished_at: timestamp(),
            output: out.display().to_string(),
            rows,
            grids,
            config: resolved.canonical(),
        }
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        write_atomic(&manifest_path(out), &json)
    }
}
