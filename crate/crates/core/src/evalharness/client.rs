//! Model wire protocol.
//!
//! * `POST /v1/complete` `{"prompt","max_tokens","temperature","logprob_targets","attention_dropout_mask"}`
//!   answers `{"text","target_logprobs"}`. When targets are given every one
//!   must appear in `target_logprobs`.
//! * `POST /v1/embed` `{"text","attention_dropout_mask"}` answers `{"embedding"}`,
//!   the token-mean of final-layer activations. The mask carries one flag per
//!   `\w+` word of `text` (`true` = masked); masking everything is rejected.
//! * `GET /v1/health` answers any 2xx body.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::http::{HttpConfig, HttpFailure, JsonClient};
use crate::unitsplit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprob_targets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention_dropout_mask: Option<Vec<bool>>,
}

impl ModelRequest {
    /// Temperature-0 request, as used for all multiple-choice evaluation.
    pub fn greedy(prompt: impl Into<String>, max_tokens: usize) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens,
            temperature: 0.0,
            logprob_targets: None,
            attention_dropout_mask: None,
        }
    }

    pub fn with_targets(mut self, targets: Vec<String>) -> Self {
        self.logprob_targets = Some(targets);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(format!("temperature must be finite and >= 0, got {}", self.temperature));
        }
        if let Some(t) = &self.logprob_targets {
            if t.is_empty() || t.iter().any(String::is_empty) {
                return Err("logprob_targets must be non-empty strings".into());
            }
        }
        if let Some(mask) = &self.attention_dropout_mask {
            check_mask(&self.prompt, mask)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_logprobs: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention_dropout_mask: Option<Vec<bool>>,
}

impl EmbedRequest {
    pub fn new(text: impl Into<String>, mask: Option<Vec<bool>>) -> Self {
        Self {
            text: text.into(),
            attention_dropout_mask: mask,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match &self.attention_dropout_mask {
            Some(mask) => check_mask(&self.text, mask),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embedding: Vec<f64>,
}

fn check_mask(text: &str, mask: &[bool]) -> Result<(), String> {
    let words = unitsplit::word_count(text);
    if mask.len() != words {
        return Err(format!("mask has {} flags for {words} words", mask.len()));
    }
    if mask.iter().all(|m| *m) {
        return Err("attention_dropout_mask masks every word".into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("network error: {0}")]
    Network(String),
    #[error("model service answered HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed model response: {0}")]
    Protocol(String),
    #[error("invalid model request: {0}")]
    InvalidRequest(String),
    #[error("{0}")]
    Unsupported(String),
}

impl ModelError {
    /// Transport or server-side failure, as opposed to a caller mistake.
    pub fn is_backend_failure(&self) -> bool {
        matches!(self, ModelError::Network(_) | ModelError::Protocol(_))
            || matches!(self, ModelError::Rejected { status, .. } if *status >= 500 || *status == 429)
    }
}

impl From<HttpFailure> for ModelError {
    fn from(e: HttpFailure) -> Self {
        match e {
            HttpFailure::Network(m) => ModelError::Network(m),
            HttpFailure::Status { status, body } => ModelError::Rejected { status, body },
            HttpFailure::MissingCredential(v) => ModelError::InvalidRequest(format!("credential variable {v} is not set")),
        }
    }
}

pub trait ModelClient: Send + Sync {
    fn id(&self) -> String;

    fn max_concurrency(&self) -> usize {
        1
    }

    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError>;

    fn embed(&self, _req: &EmbedRequest) -> Result<EmbedResponse, ModelError> {
        Err(ModelError::Unsupported(format!("{} does not serve embeddings", self.id())))
    }

    /// Cheap reachability check made before a run starts.
    fn health(&self) -> Result<(), ModelError> {
        Ok(())
    }
}

pub struct HttpModelClient {
    client: JsonClient,
}

impl std::fmt::Debug for HttpModelClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpModelClient").field("url", &self.client.config().base_url).finish()
    }
}

impl HttpModelClient {
    pub fn new(config: HttpConfig) -> Self {
        Self {
            client: JsonClient::new(config),
        }
    }

    fn call<Req: Serialize, Resp: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        req: &Req,
    ) -> Result<Resp, ModelError> {
        let body = serde_json::to_string(req).expect("request serializes");
        let raw = self.client.post(path, &body)?;
        serde_json::from_str(&raw).map_err(|e| ModelError::Protocol(format!("{e}: {raw}")))
    }
}

impl ModelClient for HttpModelClient {
    fn id(&self) -> String {
        format!("http:{}", self.client.config().base_url)
    }

    fn max_concurrency(&self) -> usize {
        self.client.config().max_concurrency
    }

    fn health(&self) -> Result<(), ModelError> {
        self.client.get("/v1/health").map(|_| ()).map_err(Into::into)
    }

    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        req.validate().map_err(ModelError::InvalidRequest)?;
        let resp: ModelResponse = self.call("/v1/complete", req)?;
        if let Some(targets) = &req.logprob_targets {
            let lp = resp
                .target_logprobs
                .as_ref()
                .ok_or_else(|| ModelError::Protocol("target_logprobs missing".into()))?;
            if let Some(t) = targets.iter().find(|t| !lp.contains_key(*t)) {
                return Err(ModelError::Protocol(format!("no logprob for target {t:?}")));
            }
        }
        Ok(resp)
    }

    fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, ModelError> {
        req.validate().map_err(ModelError::InvalidRequest)?;
        let resp: EmbedResponse = self.call("/v1/embed", req)?;
        if resp.embedding.is_empty() || resp.embedding.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Protocol("embedding must be non-empty and finite".into()));
        }
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let req = ModelRequest::greedy("Q", 1).with_targets(vec!["A".into()]);
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["logprob_targets"][0], "A");
        assert!(v.get("attention_dropout_mask").is_none());
        let resp: ModelResponse = serde_json::from_str(r#"{"text":"A"}"#).unwrap();
        assert!(resp.target_logprobs.is_none());
    }

    #[test]
    fn masks_validated() {
        assert!(EmbedRequest::new("a b", Some(vec![true, false])).validate().is_ok());
        assert!(EmbedRequest::new("a b", Some(vec![true, true])).validate().is_err());
        assert!(EmbedRequest::new("a b", Some(vec![false])).validate().is_err());
        assert!(EmbedRequest::new("a b", None).validate().is_ok());
    }

    #[test]
    fn negative_temperature_rejected() {
        let mut r = ModelRequest::greedy("x", 1);
        r.temperature = -1.0;
        assert!(r.validate().is_err());
    }
}
