//! Sidecar manifests recorded next to every derived dataset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lang::LanguageSet;
use super::DataError;

pub const TOOL_NAME: &str = "xbarrier";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance record for a derived file. Together with the source bytes it
/// carries everything needed to regenerate the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool: String,
    pub tool_version: String,
    /// Operation that produced the output (`gen-variants`, `mix-corpus`, ...).
    pub operation: String,
    pub source_path: String,
    pub source_sha256: String,
    /// Identifier of the root dataset; inherited through derivation chains.
    pub dataset_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_set: Option<LanguageSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_id: Option<String>,
    /// Extra operation-specific facts (mixup assignment mode, perturb spec...).
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
    pub item_count: usize,
    pub output_sha256: String,
    pub created_at: String,
}

impl DatasetManifest {
    /// Starts a manifest for `operation` reading from `source`.
    pub fn for_source(operation: &str, source: &Path) -> Result<Self, DataError> {
        let bytes = fs::read(source).map_err(|e| DataError::io(source, e))?;
        let source_sha256 = sha256_hex(&bytes);
        let dataset_id = match DatasetManifest::load_sidecar(source) {
            Ok(Some(parent)) => parent.dataset_id,
            _ => source_sha256[..16].to_string(),
        };
        Ok(Self {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            operation: operation.to_string(),
            source_path: source.display().to_string(),
            source_sha256,
            dataset_id,
            variant: None,
            language_set: None,
            seed: None,
            granularity: None,
            backend_id: None,
            details: BTreeMap::new(),
            item_count: 0,
            output_sha256: String::new(),
            created_at: creation_timestamp(),
        })
    }

    pub fn sidecar_path(output: &Path) -> PathBuf {
        let mut os = output.as_os_str().to_owned();
        os.push(".manifest.json");
        PathBuf::from(os)
    }

    pub fn load_sidecar(output: &Path) -> Result<Option<Self>, DataError> {
        let path = Self::sidecar_path(output);
        if !path.exists() {
            return Ok(None);
        }
        Self::load(&path).map(Some)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DataError::Schema {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Fills the output digest and count, then writes the sidecar.
    pub fn finish(&mut self, output: &Path, item_count: usize) -> Result<(), DataError> {
        let bytes = fs::read(output).map_err(|e| DataError::io(output, e))?;
        self.output_sha256 = sha256_hex(&bytes);
        self.item_count = item_count;
        let path = Self::sidecar_path(output);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| DataError::io(&path, e))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// RFC 3339 timestamp; honours `SOURCE_DATE_EPOCH` for reproducible builds.
pub fn creation_timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    let ts = fixed.unwrap_or_else(chrono::Utc::now);
    ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
