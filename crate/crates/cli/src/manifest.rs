//! Run manifests: the resolved configuration plus dataset fingerprints,
//! enough to reproduce a run bit-for-bit from the same input files.

use std::fs;
use std::path::{Path, PathBuf};

use elicitsim::dataset::RatingsFormat;
use elicitsim::sim::SimulationConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "elicitsim";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSection {
    pub path: PathBuf,
    pub format: RatingsFormat,
    pub sha256: String,
    pub features_path: Option<PathBuf>,
    pub features_sha256: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ProtocolSection {
    pub min_count: usize,
    pub k_per_user: usize,
    pub t_per_user: usize,
    /// 0 keeps every user.
    pub max_users: usize,
    pub seed: u64,
}

/// Post-filter dataset statistics observed by the run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ObservedSection {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub created_utc: String,
    pub command: String,
    pub data: DataSection,
    pub protocol: ProtocolSection,
    pub observed: ObservedSection,
    /// One simulation per strategy; `run` has exactly one entry.
    pub runs: Vec<SimulationConfig>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<(), String> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| format!("manifest serialization failed: {e}"))?;
        fs::write(path, json + "\n").map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Confirms the referenced input files still have the recorded
    /// checksums.
    pub fn verify_inputs(&self) -> Result<(), String> {
        let got = sha256_file(&self.data.path)?;
        if got != self.data.sha256 {
            return Err(format!(
                "{} changed since the manifest was written (sha256 {got} != {})",
                self.data.path.display(),
                self.data.sha256
            ));
        }
        if let (Some(path), Some(expected)) = (&self.data.features_path, &self.data.features_sha256)
        {
            let got = sha256_file(path)?;
            if &got != expected {
                return Err(format!(
                    "{} changed since the manifest was written (sha256 {got} != {expected})",
                    path.display()
                ));
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}
