use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TranslateError;
use crate::datamodel::LanguageTag;

/// SHA-256 over `backend_id 0 source 0 target 0 text`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(pub [u8; 32]);

impl CacheKey {
    pub fn new(backend_id: &str, source: &LanguageTag, target: &LanguageTag, text: &str) -> Self {
        let mut h = Sha256::new();
        h.update(backend_id.as_bytes());
        h.update([0u8]);
        h.update(source.as_str().as_bytes());
        h.update([0u8]);
        h.update(target.as_str().as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        CacheKey(h.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(CacheKey(bytes.try_into().ok()?))
    }
}

/// One line of a cache segment file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key_hex: String,
    pub source: String,
    pub target: String,
    pub text: String,
    pub translation: String,
}

/// Append-only translation cache: JSONL segment files in a directory plus an
/// in-memory index built at open. Each process appends to its own segment.
pub struct TranslationCache {
    index: DashMap<CacheKey, String>,
    dir: Option<PathBuf>,
    writer: Mutex<Option<File>>,
}

impl std::fmt::Debug for TranslationCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TranslationCache")
            .field("entries", &self.index.len())
            .field("dir", &self.dir)
            .finish()
    }
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self {
            index: DashMap::new(),
            dir: None,
            writer: Mutex::new(None),
        }
    }

    pub fn open(dir: &Path) -> Result<Self, TranslateError> {
        fs::create_dir_all(dir).map_err(|e| TranslateError::cache_io(dir, e))?;
        let mut segments: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| TranslateError::cache_io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        segments.sort();
        let index = DashMap::new();
        for seg in &segments {
            let file = File::open(seg).map_err(|e| TranslateError::cache_io(seg, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| TranslateError::cache_io(seg, e))?;
                // A torn final line from an interrupted run is skipped.
                let Ok(entry) = serde_json::from_str::<CacheEntry>(&line) else {
                    if !line.trim().is_empty() {
                        log::warn!("skipping unreadable cache line in {}", seg.display());
                    }
                    continue;
                };
                if let Some(key) = CacheKey::from_hex(&entry.key_hex) {
                    index.insert(key, entry.translation);
                }
            }
        }
        log::debug!("opened translation cache {} ({} entries)", dir.display(), index.len());
        Ok(Self {
            index,
            dir: Some(dir.to_path_buf()),
            writer: Mutex::new(None),
        })
    }

    /// Whether entries are written to disk.
    pub fn is_persistent(&self) -> bool {
        self.dir.is_some()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        self.index.get(key).map(|v| v.value().clone())
    }

    pub fn insert(
        &self,
        key: CacheKey,
        source: &LanguageTag,
        target: &LanguageTag,
        text: &str,
        translation: &str,
    ) -> Result<(), TranslateError> {
        if let Some(dir) = &self.dir {
            let entry = CacheEntry {
                key_hex: key.to_hex(),
                source: source.to_string(),
                target: target.to_string(),
                text: text.to_string(),
                translation: translation.to_string(),
            };
            let mut line = serde_json::to_string(&entry).expect("entry serializes");
            line.push('\n');
            let mut guard = self.writer.lock().expect("cache writer poisoned");
            if guard.is_none() {
                let path = dir.join(segment_name());
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .map_err(|e| TranslateError::cache_io(&path, e))?;
                *guard = Some(file);
            }
            let file = guard.as_mut().expect("writer just opened");
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| TranslateError::cache_io(dir, e))?;
        }
        self.index.insert(key, translation.to_string());
        Ok(())
    }
}

fn segment_name() -> String {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    format!("segment-{nanos:024}-{}.jsonl", std::process::id())
}
