//! Pluggable translation backends behind a content-addressed cache.

mod backend;
mod cache;

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use backend::{
    mock_tag_language, mock_translate, strip_mock_tags, BackendKind, BackendSpec,
    CacheOnlyBackend, HttpBackend, HttpConfig, MockBackend, RetryPolicy, TranslationBackend,
    MOCK_BACKEND_ID,
};
pub use cache::{CacheEntry, CacheKey, TranslationCache};

use crate::datamodel::LanguageTag;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("network error: {0}")]
    Network(String),
    #[error("cache miss in cache-only mode ({source_lang}->{target_lang}: {text:?})")]
    CacheMiss {
        source_lang: String,
        target_lang: String,
        text: String,
    },
    #[error("backend rejected request with status {status}: {body}")]
    BackendRejection { status: u16, body: String },
    #[error("invalid translation request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend spec: {0}")]
    InvalidSpec(String),
    #[error("cache I/O error at {path}: {message}")]
    CacheIo { path: String, message: String },
}

impl TranslateError {
    pub(crate) fn cache_io(path: &Path, e: std::io::Error) -> Self {
        TranslateError::CacheIo {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// Whether the failure came from talking to a remote service.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            TranslateError::Network(_) | TranslateError::BackendRejection { .. } | TranslateError::CacheMiss { .. }
        )
    }
}

/// `text` from `source` into `target`. Equal languages mean identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub source: LanguageTag,
    pub target: LanguageTag,
}

impl TranslationRequest {
    pub fn new(
        text: impl Into<String>,
        source: LanguageTag,
        target: LanguageTag,
    ) -> Result<Self, TranslateError> {
        let text = text.into();
        if text.is_empty() {
            return Err(TranslateError::InvalidRequest("empty text".into()));
        }
        Ok(Self { text, source, target })
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }
}

/// Indices that failed in a batch, plus whatever succeeded.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{} of {} translations failed; first: {}", .failures.len(), .partial.len(), .failures[0].1)]
pub struct BatchError {
    pub failures: Vec<(usize, TranslateError)>,
    pub partial: Vec<Option<String>>,
}

/// A backend paired with its cache. Cheap to clone and share across threads.
#[derive(Clone)]
pub struct Translator {
    backend: Arc<dyn TranslationBackend>,
    cache: Arc<TranslationCache>,
}

impl std::fmt::Debug for Translator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Translator")
            .field("backend", &self.backend.backend_id())
            .field("cache", &self.cache)
            .finish()
    }
}

impl Translator {
    pub fn new(backend: Arc<dyn TranslationBackend>, cache: Arc<TranslationCache>) -> Self {
        Self { backend, cache }
    }

    pub fn from_spec(spec: &BackendSpec, cache: Arc<TranslationCache>) -> Result<Self, TranslateError> {
        Ok(Self::new(spec.build()?, cache))
    }

    /// Mock backend with an in-memory cache.
    pub fn mock() -> Self {
        Self::new(Arc::new(MockBackend::new()), Arc::new(TranslationCache::in_memory()))
    }

    pub fn backend_id(&self) -> &str {
        self.backend.backend_id()
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }

    fn key(&self, req: &TranslationRequest) -> CacheKey {
        CacheKey::new(self.backend.backend_id(), &req.source, &req.target, &req.text)
    }

    pub fn translate(&self, req: &TranslationRequest) -> Result<String, TranslateError> {
        if req.is_identity() {
            return Ok(req.text.clone());
        }
        let key = self.key(req);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let out = self
            .backend
            .translate_text(&req.text, &req.source, &req.target)?;
        self.cache
            .insert(key, &req.source, &req.target, &req.text, &out)?;
        Ok(out)
    }

    /// Convenience wrapper building the request inline.
    pub fn translate_text(
        &self,
        text: &str,
        source: &LanguageTag,
        target: &LanguageTag,
    ) -> Result<String, TranslateError> {
        self.translate(&TranslationRequest::new(text, source.clone(), target.clone())?)
    }

    /// Translates many requests. Distinct uncached keys reach the backend
    /// once each, with at most `max_concurrency` in flight. `output[i]`
    /// always answers `reqs[i]`.
    pub fn translate_batch(&self, reqs: &[TranslationRequest]) -> Result<Vec<String>, BatchError> {
        let mut out: Vec<Option<String>> = vec![None; reqs.len()];
        let mut pending: Vec<(CacheKey, usize)> = Vec::new();
        let mut waiting: HashMap<CacheKey, Vec<usize>> = HashMap::new();
        for (i, req) in reqs.iter().enumerate() {
            if req.is_identity() {
                out[i] = Some(req.text.clone());
                continue;
            }
            let key = self.key(req);
            if let Some(hit) = self.cache.get(&key) {
                out[i] = Some(hit);
                continue;
            }
            let slot = waiting.entry(key).or_default();
            if slot.is_empty() {
                pending.push((key, i));
            }
            slot.push(i);
        }

        let results: Mutex<Vec<Option<Result<String, TranslateError>>>> =
            Mutex::new(vec![None; pending.len()]);
        let next = AtomicUsize::new(0);
        let workers = self.backend.max_concurrency().max(1).min(pending.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let j = next.fetch_add(1, Ordering::SeqCst);
                    let Some((_, i)) = pending.get(j) else { break };
                    let r = self.translate(&reqs[*i]);
                    results.lock().expect("results poisoned")[j] = Some(r);
                });
            }
        });

        let mut failures = Vec::new();
        for ((key, _), r) in pending.iter().zip(results.into_inner().expect("results poisoned")) {
            let r = r.expect("every pending request ran");
            for &i in &waiting[key] {
                match &r {
                    Ok(t) => out[i] = Some(t.clone()),
                    Err(e) => failures.push((i, e.clone())),
                }
            }
        }
        if failures.is_empty() {
            Ok(out.into_iter().map(|o| o.expect("all filled")).collect())
        } else {
            failures.sort_by_key(|(i, _)| *i);
            Err(BatchError {
                failures,
                partial: out,
            })
        }
    }
}
