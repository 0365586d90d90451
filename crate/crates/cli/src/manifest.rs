use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Provenance embedded in every report. Re-running with the same command,
/// parameters and seed reproduces `results` byte for byte; only the
/// timestamps differ.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub master_seed: u64,
    pub artifact_version: String,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn start(command: &str, master_seed: u64) -> Self {
        let mut parameters = BTreeMap::new();
        parameters.insert("rng".to_string(), trajmeasure::RNG_NAME.to_string());
        Self {
            command: command.to_string(),
            parameters,
            master_seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn finish(&mut self) {
        self.finished_at = now();
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Writes `{"manifest": ..., "results": ...}` plus any extra top-level fields.
pub fn write_report(out: Option<&Path>, manifest: &RunManifest, results: Value, extra: &[(&str, Value)]) -> io::Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("manifest".into(), serde_json::to_value(manifest).map_err(io::Error::other)?);
    for (k, v) in extra {
        doc.insert((*k).into(), v.clone());
    }
    doc.insert("results".into(), results);
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(io::Error::other)?;
    text.push('\n');
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()
        }
        None => io::stdout().write_all(text.as_bytes()),
    }
}

/// Sidecar path for outputs that cannot embed a manifest (CSV).
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}
