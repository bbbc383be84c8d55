use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Run-output bookkeeping: the config that produced the run, wall times, and
/// the complete list of files written. Every listed file exists after a
/// successful run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub model: String,
    pub seed: u64,
    /// Exact echo of the effective config in the config file format.
    pub config: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<String>,
    /// Free-form per-run diagnostics (convergence flags, clamp counts, rates).
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(model: &str, seed: u64, config_echo: String) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            model: model.to_string(),
            seed,
            config: config_echo,
            started_unix: now_unix(),
            finished_unix: 0.0,
            files: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn add_file(&mut self, path: &Path) {
        self.files.push(path.file_name().unwrap_or_default().to_string_lossy().into_owned());
    }

    pub fn add_diagnostic<T: Serialize>(&mut self, key: &str, value: T) {
        if let Ok(v) = serde_json::to_value(value) {
            self.diagnostics.insert(key.to_string(), v);
        }
    }

    /// Stamp the finish time and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = now_unix();
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listed_files_exist_after_finish() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = RunManifest::start("goy", 42, "model = \"goy\"".into());
        let csv = dir.path().join("data.csv");
        std::fs::write(&csv, "a,b\n1,2\n").unwrap();
        manifest.add_file(&csv);
        manifest.add_diagnostic("n_steps", 10u64);
        let path = manifest.finish(dir.path()).unwrap();
        assert!(path.exists());

        let text = std::fs::read_to_string(&path).unwrap();
        let reloaded: RunManifest = serde_json::from_str(&text).unwrap();
        for file in &reloaded.files {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }
        assert!(reloaded.finished_unix >= reloaded.started_unix);
    }
}
