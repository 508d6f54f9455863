use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::TranslateError;
use crate::datamodel::LanguageTag;
pub use crate::http::{HttpConfig, RetryPolicy};
use crate::http::{HttpFailure, JsonClient};

/// A translation service addressed by `(source, target, text)`.
pub trait TranslationBackend: Send + Sync {
    /// Stable identifier; part of every cache key.
    fn backend_id(&self) -> &str;

    /// Upper bound on in-flight requests.
    fn max_concurrency(&self) -> usize {
        1
    }

    fn translate_text(
        &self,
        text: &str,
        source: &LanguageTag,
        target: &LanguageTag,
    ) -> Result<String, TranslateError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    HttpService(HttpConfig),
    Mock,
    CacheOnly,
}

/// Declarative backend description, as given on the command line:
/// `mock`, `http:URL` or `cache-only:<backend id>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub backend_id: String,
}

impl BackendSpec {
    pub fn mock() -> Self {
        Self {
            kind: BackendKind::Mock,
            backend_id: MOCK_BACKEND_ID.to_string(),
        }
    }

    pub fn http(config: HttpConfig) -> Self {
        let backend_id = format!("http:{}", config.base_url);
        Self {
            kind: BackendKind::HttpService(config),
            backend_id,
        }
    }

    /// Replays entries written under `backend_id` without contacting anything.
    pub fn cache_only(backend_id: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::CacheOnly,
            backend_id: backend_id.into(),
        }
    }

    pub fn validate(&self) -> Result<(), TranslateError> {
        if let BackendKind::HttpService(cfg) = &self.kind {
            if cfg.max_concurrency == 0 {
                return Err(TranslateError::InvalidSpec("max_concurrency must be >= 1".into()));
            }
            if cfg.retry.max_attempts == 0 {
                return Err(TranslateError::InvalidSpec("max_attempts must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn TranslationBackend>, TranslateError> {
        self.validate()?;
        Ok(match &self.kind {
            BackendKind::Mock => Arc::new(MockBackend::new()),
            BackendKind::CacheOnly => Arc::new(CacheOnlyBackend::new(self.backend_id.clone())),
            BackendKind::HttpService(cfg) => Arc::new(HttpBackend::new(cfg.clone())),
        })
    }
}

impl FromStr for BackendSpec {
    type Err = TranslateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mock" {
            Ok(BackendSpec::mock())
        } else if let Some(url) = s.strip_prefix("http:") {
            // Accept both `http:URL` and a bare `http://host` string.
            let url = if url.starts_with("//") { s } else { url };
            Ok(BackendSpec::http(HttpConfig::new(url)))
        } else if s.starts_with("https://") {
            Ok(BackendSpec::http(HttpConfig::new(s)))
        } else if let Some(id) = s.strip_prefix("cache-only:") {
            Ok(BackendSpec::cache_only(id))
        } else {
            Err(TranslateError::InvalidSpec(format!(
                "unknown backend {s:?}; expected mock, http:URL or cache-only:ID"
            )))
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.backend_id)
    }
}

pub const MOCK_BACKEND_ID: &str = "mock";

/// Deterministic offline backend: `t` when source == target, otherwise
/// `"⟦" + target + "⟧" + t`. Counts every call it receives.
#[derive(Debug)]
pub struct MockBackend {
    id: String,
    concurrency: usize,
    calls: AtomicUsize,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self::with_concurrency(1)
    }

    pub fn with_concurrency(concurrency: usize) -> Self {
        Self {
            id: MOCK_BACKEND_ID.to_string(),
            concurrency: concurrency.max(1),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// The mock translation of `text` into `target`.
pub fn mock_translate(text: &str, source: &LanguageTag, target: &LanguageTag) -> String {
    if source == target {
        text.to_string()
    } else {
        format!("⟦{target}⟧{text}")
    }
}

fn tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"⟦([a-z]{2,3})⟧").expect("valid regex"))
}

/// Removes every mock language tag, inverting any number of mock translations.
pub fn strip_mock_tags(text: &str) -> String {
    tag_re().replace_all(text, "").into_owned()
}

/// Language of the outermost leading mock tag, if any.
pub fn mock_tag_language(text: &str) -> Option<&str> {
    let caps = tag_re().captures(text)?;
    let whole = caps.get(0)?;
    (whole.start() == 0).then(|| caps.get(1).map(|m| m.as_str()))?
}

impl TranslationBackend for MockBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn max_concurrency(&self) -> usize {
        self.concurrency
    }

    fn translate_text(
        &self,
        text: &str,
        source: &LanguageTag,
        target: &LanguageTag,
    ) -> Result<String, TranslateError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(mock_translate(text, source, target))
    }
}

/// Backend that has nothing behind it: every cache miss is an error.
#[derive(Debug)]
pub struct CacheOnlyBackend {
    id: String,
}

impl CacheOnlyBackend {
    pub fn new(id: String) -> Self {
        Self { id }
    }
}

impl TranslationBackend for CacheOnlyBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn max_concurrency(&self) -> usize {
        8
    }

    fn translate_text(
        &self,
        text: &str,
        source: &LanguageTag,
        target: &LanguageTag,
    ) -> Result<String, TranslateError> {
        Err(TranslateError::CacheMiss {
            source_lang: source.to_string(),
            target_lang: target.to_string(),
            text: text.chars().take(60).collect(),
        })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    text: &'a str,
    source: &'a str,
    target: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Client for `POST {base_url}/v1/translate` with body
/// `{"text","source","target"}` answering `{"text"}`.
pub struct HttpBackend {
    id: String,
    client: JsonClient,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend").field("id", &self.id).finish()
    }
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        Self {
            id: format!("http:{}", config.base_url),
            client: JsonClient::new(config),
        }
    }
}

impl TranslationBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn max_concurrency(&self) -> usize {
        self.client.config().max_concurrency
    }

    fn translate_text(
        &self,
        text: &str,
        source: &LanguageTag,
        target: &LanguageTag,
    ) -> Result<String, TranslateError> {
        let body = serde_json::to_string(&WireRequest {
            text,
            source: source.as_str(),
            target: target.as_str(),
        })
        .expect("request serializes");
        let raw = self.client.post("/v1/translate", &body).map_err(|e| match e {
            HttpFailure::Network(m) => TranslateError::Network(m),
            HttpFailure::Status { status, body } => TranslateError::BackendRejection { status, body },
            HttpFailure::MissingCredential(v) => {
                TranslateError::InvalidSpec(format!("credential variable {v} is not set"))
            }
        })?;
        serde_json::from_str::<WireResponse>(&raw)
            .map(|w| w.text)
            .map_err(|e| TranslateError::BackendRejection {
                status: 200,
                body: format!("unparseable response ({e}): {raw}"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn lang(s: &str) -> LanguageTag {
        LanguageTag::parse(s).unwrap()
    }

    #[test]
    fn mock_contract() {
        assert_eq!(mock_translate("apple", &lang("en"), &lang("es")), "⟦es⟧apple");
        assert_eq!(mock_translate("apple", &lang("en"), &lang("en")), "apple");
        assert_eq!(strip_mock_tags("⟦es⟧apple and ⟦fr⟧pear"), "apple and pear");
        assert_eq!(mock_tag_language("⟦de⟧x"), Some("de"));
        assert_eq!(mock_tag_language("x ⟦de⟧x"), None);
        assert_eq!(mock_tag_language("plain"), None);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("mock".parse::<BackendSpec>().unwrap(), BackendSpec::mock());
        let http: BackendSpec = "http:http://127.0.0.1:9/".parse().unwrap();
        assert_eq!(http.backend_id, "http:http://127.0.0.1:9");
        let bare: BackendSpec = "http://127.0.0.1:9".parse().unwrap();
        assert_eq!(bare.backend_id, http.backend_id);
        let replay: BackendSpec = "cache-only:http:http://127.0.0.1:9".parse().unwrap();
        assert_eq!(replay.backend_id, http.backend_id);
        assert!(matches!(replay.kind, BackendKind::CacheOnly));
        assert!("ftp:x".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn invalid_http_spec() {
        let mut cfg = HttpConfig::new("http://x");
        cfg.max_concurrency = 0;
        assert!(BackendSpec::http(cfg.clone()).build().is_err());
        cfg.max_concurrency = 1;
        cfg.retry.max_attempts = 0;
        assert!(BackendSpec::http(cfg).build().is_err());
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy {
            max_attempts: 10,
            backoff_base_ms: 100,
            backoff_ceiling_ms: 1000,
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(400));
        assert_eq!(p.delay(9), Duration::from_millis(1000));
        assert_eq!(p.delay(200), Duration::from_millis(1000));
    }
}
