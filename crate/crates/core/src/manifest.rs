//! Reproducibility manifest written next to every output set.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;
use crate::trajectory::{sidecar_path, InputFormat};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub format: InputFormat,
    pub sha256: String,
    /// Digest of the metadata sidecar, when one exists.
    pub sidecar_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_path: Option<String>,
    pub base_seed: u64,
    pub resolved: ResolvedConfig,
    pub inputs: Vec<InputDigest>,
    /// Output file name → sha256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl InputDigest {
    pub fn of(path: &Path, format: InputFormat) -> std::io::Result<Self> {
        let side = sidecar_path(path);
        Ok(Self {
            path: path.display().to_string(),
            format,
            sha256: sha256_file(path)?,
            sidecar_sha256: if side.exists() { Some(sha256_file(&side)?) } else { None },
        })
    }

    /// Re-hashes the input and reports the first mismatch.
    pub fn verify(&self) -> Result<(), String> {
        let now = InputDigest::of(Path::new(&self.path), self.format).map_err(|e| format!("{}: {e}", self.path))?;
        if now.sha256 != self.sha256 {
            return Err(format!("{} changed since the manifest was written", self.path));
        }
        if now.sidecar_sha256 != self.sidecar_sha256 {
            return Err(format!("sidecar of {} changed since the manifest was written", self.path));
        }
        Ok(())
    }
}

impl RunManifest {
    pub fn new(config_path: Option<String>, resolved: ResolvedConfig, inputs: Vec<InputDigest>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: TOOL_VERSION.to_string(),
            config_path,
            base_seed: resolved.scenario.base_seed,
            resolved,
            inputs,
            outputs: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is serializable");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    }
}
