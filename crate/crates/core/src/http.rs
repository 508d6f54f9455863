//! Blocking JSON-over-HTTP client shared by the translation backend and the
//! model client: bounded concurrency, bearer auth from an env var, and
//! exponential-backoff retries on 429 / 5xx / network errors.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_ceiling_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            backoff_base_ms: 250,
            backoff_ceiling_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        let ms = self
            .backoff_base_ms
            .saturating_mul(factor)
            .min(self.backoff_ceiling_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    /// Environment variable holding a bearer token, if the service needs one.
    pub auth_env_var: Option<String>,
    pub max_concurrency: usize,
    pub retry: RetryPolicy,
    pub timeout_ms: u64,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            auth_env_var: None,
            max_concurrency: 4,
            retry: RetryPolicy::default(),
            timeout_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HttpFailure {
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().expect("permits poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("permits poisoned");
        }
        *free -= 1;
        PermitGuard { permits: self }
    }
}

struct PermitGuard<'a> {
    permits: &'a Permits,
}

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.permits.free.lock().expect("permits poisoned") += 1;
        self.permits.cv.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retryable(HttpFailure),
    Fatal(HttpFailure),
}

pub struct JsonClient {
    config: HttpConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl std::fmt::Debug for JsonClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonClient").field("base_url", &self.config.base_url).finish()
    }
}

impl JsonClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Self {
            permits: Permits::new(config.max_concurrency.max(1)),
            config,
            agent,
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn token(&self) -> Result<Option<String>, HttpFailure> {
        match &self.config.auth_env_var {
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| HttpFailure::MissingCredential(var.clone())),
            None => Ok(None),
        }
    }

    fn attempt(&self, path: &str, body: Option<&str>, token: Option<&str>) -> Attempt {
        let url = format!("{}{path}", self.config.base_url);
        let result = match body {
            Some(body) => {
                let mut req = self.agent.post(&url).header("Content-Type", "application/json");
                if let Some(t) = token {
                    req = req.header("Authorization", &format!("Bearer {t}"));
                }
                req.send(body)
            }
            None => {
                let mut req = self.agent.get(&url);
                if let Some(t) = token {
                    req = req.header("Authorization", &format!("Bearer {t}"));
                }
                req.call()
            }
        };
        let mut resp = match result {
            Ok(r) => r,
            Err(e) => return Attempt::Retryable(HttpFailure::Network(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retryable(HttpFailure::Network(e.to_string())),
        };
        if (200..300).contains(&status) {
            return Attempt::Done(text);
        }
        let err = HttpFailure::Status { status, body: text };
        if status == 429 || status >= 500 {
            Attempt::Retryable(err)
        } else {
            Attempt::Fatal(err)
        }
    }

    fn run(&self, path: &str, body: Option<&str>) -> Result<String, HttpFailure> {
        let token = self.token()?;
        let _permit = self.permits.acquire();
        let mut last = None;
        for attempt in 0..self.config.retry.max_attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.config.retry.delay(attempt - 1));
            }
            match self.attempt(path, body, token.as_deref()) {
                Attempt::Done(t) => return Ok(t),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retryable(e) => {
                    log::warn!("{}{path} attempt {} failed: {e}", self.config.base_url, attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// POSTs a JSON body and returns the 2xx response body.
    pub fn post(&self, path: &str, body: &str) -> Result<String, HttpFailure> {
        self.run(path, Some(body))
    }

    pub fn get(&self, path: &str) -> Result<String, HttpFailure> {
        self.run(path, None)
    }
}
