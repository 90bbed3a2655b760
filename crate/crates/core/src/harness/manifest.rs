use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Path relative to the run directory.
    pub path: PathBuf,
    pub sha256: String,
    pub stage: String,
}

/// Index of every file a run produced, with digests and stage timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub root_seed: u64,
    pub mock: bool,
    pub config: RunConfig,
    pub artifacts: BTreeMap<String, ArtifactRecord>,
    /// Wall-clock seconds per stage, most recent invocation.
    pub timings: BTreeMap<String, f64>,
    /// Free-form notes, e.g. what a replication run varied.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(config: RunConfig, root_seed: u64, mock: bool) -> Self {
        Self {
            root_seed,
            mock,
            config,
            artifacts: BTreeMap::new(),
            timings: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Self>, HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(body) => serde_json::from_str(&body)
                .map(Some)
                .map_err(|e| HarnessError::Manifest(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(HarnessError::io(&path, e)),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))
    }

    /// Records `relative` (inside `dir`) under `name` with its current digest.
    pub fn record(&mut self, dir: &Path, name: &str, relative: &Path, stage: &str) -> Result<(), HarnessError> {
        let sha256 = sha256_file(&dir.join(relative))?;
        self.artifacts.insert(
            name.to_string(),
            ArtifactRecord {
                path: relative.to_path_buf(),
                sha256,
                stage: stage.to_string(),
            },
        );
        Ok(())
    }

    pub fn has(&self, name: &str) -> bool {
        self.artifacts.contains_key(name)
    }

    /// Absolute path of a recorded artifact, after checking it still matches its digest.
    pub fn require(&self, dir: &Path, name: &str) -> Result<PathBuf, HarnessError> {
        let record = self
            .artifacts
            .get(name)
            .ok_or_else(|| HarnessError::MissingDependency {
                artifact: name.to_string(),
                reason: "not produced yet".into(),
            })?;
        let path = dir.join(&record.path);
        if !path.exists() {
            return Err(HarnessError::MissingDependency {
                artifact: name.to_string(),
                reason: format!("{} was deleted", path.display()),
            });
        }
        if sha256_file(&path)? != record.sha256 {
            return Err(HarnessError::MissingDependency {
                artifact: name.to_string(),
                reason: format!("{} changed since it was recorded", path.display()),
            });
        }
        Ok(path)
    }
}
