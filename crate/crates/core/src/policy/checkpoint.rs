//! Policy checkpoints.
//!
//! A checkpoint is two files sharing a stem:
//!
//! * `<stem>.json`: the manifest (format tag, version, layer dims, obs/act
//!   dims, parameter count, seed, role, free-form metadata, weight digest);
//! * `<stem>.bin`: `num_params` IEEE-754 doubles, little-endian, laid out
//!   layer by layer (weight matrix row-major `out × in`, then bias) followed by
//!   `log_std`.
//!
//! Nothing time-dependent is written, so identical training runs produce
//! byte-identical checkpoints.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mlp::MlpPolicy;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "hsr-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyRole {
    LowLevel,
    HighLevel,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub role: PolicyRole,
    pub layer_dims: Vec<usize>,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub num_params: usize,
    pub seed: u64,
    /// Task the policy was trained on (`low-level`, `avoid`, `push`, `coordinate`).
    pub task: String,
    /// Frozen low-level checkpoint this high-level policy drives, relative to
    /// the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_level: Option<String>,
    pub weights_file: String,
    pub weights_sha256: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl CheckpointManifest {
    pub fn new(role: PolicyRole, policy: &MlpPolicy, seed: u64, task: &str) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            role,
            layer_dims: policy.dims().to_vec(),
            obs_dim: policy.obs_dim(),
            act_dim: policy.act_dim(),
            num_params: policy.num_params(),
            seed,
            task: task.to_string(),
            low_level: None,
            weights_file: String::new(),
            weights_sha256: String::new(),
            metadata: BTreeMap::new(),
        }
    }
}

pub fn encode_weights(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_weights(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    )
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Path of the manifest for a checkpoint stem (`dir/low` → `dir/low.json`).
pub fn manifest_path(stem: &Path) -> PathBuf {
    if stem.extension().is_some_and(|e| e == "json") {
        stem.to_path_buf()
    } else {
        stem.with_extension("json")
    }
}

/// Writes `<stem>.json` and `<stem>.bin`; returns the manifest path.
pub fn save_checkpoint(stem: &Path, policy: &MlpPolicy, manifest: &CheckpointManifest) -> Result<PathBuf> {
    let json_path = manifest_path(stem);
    let bin_path = json_path.with_extension("bin");
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let bytes = encode_weights(policy.params());
    let mut manifest = manifest.clone();
    manifest.layer_dims = policy.dims().to_vec();
    manifest.obs_dim = policy.obs_dim();
    manifest.act_dim = policy.act_dim();
    manifest.num_params = policy.num_params();
    manifest.weights_file = bin_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    manifest.weights_sha256 = sha256_hex(&bytes);
    fs::write(&bin_path, &bytes).map_err(|e| Error::io(&bin_path, e))?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok(json_path)
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointManifest, MlpPolicy)> {
    let json_path = manifest_path(path);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let bad = |reason: String| Error::Format {
        path: json_path.clone(),
        reason,
    };
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if manifest.format != CHECKPOINT_FORMAT || manifest.version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint {} v{}", manifest.format, manifest.version)));
    }
    let bin_path = json_path.with_file_name(&manifest.weights_file);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if sha256_hex(&bytes) != manifest.weights_sha256 {
        return Err(bad("weights digest mismatch".into()));
    }
    let params = decode_weights(&bytes).ok_or_else(|| bad("weights file length is not a multiple of 8".into()))?;
    if params.len() != manifest.num_params {
        return Err(bad(format!("expected {} parameters, found {}", manifest.num_params, params.len())));
    }
    let policy = MlpPolicy::from_params(manifest.layer_dims.clone(), params)?;
    if policy.obs_dim() != manifest.obs_dim || policy.act_dim() != manifest.act_dim {
        return Err(bad("obs/act dims disagree with layer dims".into()));
    }
    Ok((manifest, policy))
}

/// Loads a high-level checkpoint together with the low-level policy it drives.
pub fn load_low_level_of(manifest_file: &Path, manifest: &CheckpointManifest) -> Result<Option<(CheckpointManifest, MlpPolicy)>> {
    match &manifest.low_level {
        None => Ok(None),
        Some(rel) => {
            let dir = manifest_path(manifest_file).parent().map(Path::to_path_buf).unwrap_or_default();
            load_checkpoint(&dir.join(rel)).map(Some)
        }
    }
}
