//! Run manifest: traces every artifact back to the config and inputs that
//! produced it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config_hash: String,
    /// Input artifact file names and their content hashes at run time.
    pub inputs: BTreeMap<String, String>,
    /// Output artifact file names and their content hashes after the run.
    pub outputs: BTreeMap<String, String>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            version: 1,
            entries: Vec::new(),
        }
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(digest.len() * 2);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot hash {path:?}: {e}")))?;
    Ok(hash_bytes(&bytes))
}

impl RunManifest {
    pub fn load_or_default(out_dir: &Path) -> Result<Self, CliError> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Validation(format!("cannot read manifest: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("cannot parse manifest: {e}")))
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Validation(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::Validation(format!("cannot write manifest: {e}")))
    }

    /// Replaces (or appends) the entry for `command`.
    pub fn record(&mut self, entry: ManifestEntry) {
        if let Some(existing) = self.entries.iter_mut().find(|e| e.command == entry.command) {
            *existing = entry;
        } else {
            self.entries.push(entry);
        }
    }

    /// The recorded output hash of an artifact, from whichever command
    /// produced it last.
    pub fn recorded_output_hash(&self, file_name: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find_map(|e| e.outputs.get(file_name).map(String::as_str))
    }

    /// Strict-mode verification: every input must hash-match what its
    /// producer recorded, and every prior entry must have run under the same
    /// config.
    pub fn verify_strict(
        &self,
        out_dir: &Path,
        config_hash: &str,
        inputs: &[&str],
    ) -> Result<(), CliError> {
        for entry in &self.entries {
            if entry.config_hash != config_hash {
                return Err(CliError::Validation(format!(
                    "strict mode: config hash mismatch against manifest entry for `{}`",
                    entry.command
                )));
            }
        }
        for name in inputs {
            if let Some(recorded) = self.recorded_output_hash(name) {
                let current = hash_file(&out_dir.join(name))?;
                if current != recorded {
                    return Err(CliError::Validation(format!(
                        "strict mode: {name} changed since it was produced (hash mismatch)"
                    )));
                }
            }
        }
        Ok(())
    }
}
