use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What one completed stage produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Artifact path relative to the output directory, mapped to its SHA-256.
    pub artifacts: BTreeMap<String, String>,
    /// Digest of everything the stage consumed: upstream stage digests, external
    /// input files and the config keys it reads.
    pub inputs_digest: String,
    pub wall_clock_ms: u64,
}

impl StageRecord {
    /// Single digest over all artifacts of the stage.
    pub fn combined_digest(&self) -> String {
        let mut h = Sha256::new();
        for (path, digest) in &self.artifacts {
            h.update(path.as_bytes());
            h.update(b"\t");
            h.update(digest.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            stages: BTreeMap::new(),
        }
    }

    pub fn load(out_dir: &Path) -> Result<Option<Self>, PipelineError> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| PipelineError::StaleArtifact(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), PipelineError> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| PipelineError::io(&path, e))
    }

    /// Every artifact digest, keyed by path. Wall-clock times are left out so two
    /// runs can be compared directly.
    pub fn digests(&self) -> BTreeMap<String, String> {
        self.stages
            .values()
            .flat_map(|s| s.artifacts.iter().map(|(p, d)| (p.clone(), d.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combined_digest_depends_on_paths_and_contents() {
        let rec = |pairs: &[(&str, &str)]| StageRecord {
            artifacts: pairs.iter().map(|(p, d)| (p.to_string(), d.to_string())).collect(),
            inputs_digest: String::new(),
            wall_clock_ms: 0,
        };
        let a = rec(&[("x/1", "aa"), ("x/2", "bb")]);
        let mut slower = a.clone();
        slower.wall_clock_ms = 99;
        assert_eq!(a.combined_digest(), slower.combined_digest());
        assert_ne!(a.combined_digest(), rec(&[("x/1", "aa"), ("x/2", "bc")]).combined_digest());
        assert_ne!(a.combined_digest(), rec(&[("x/1", "aa"), ("x/3", "bb")]).combined_digest());
        assert_eq!(sha256_hex(b"").len(), 64);
    }
}
