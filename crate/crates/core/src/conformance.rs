//! Black-box checks for any server speaking the model wire protocol.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::evalharness::{EmbedResponse, ModelResponse};
use crate::http::{HttpConfig, HttpFailure, JsonClient, RetryPolicy};

/// Allowed excess of the summed target probabilities over one.
pub const MASS_TOLERANCE: f64 = 1e-6;

const PROMPT: &str = "The following are multiple choice questions (with answers) about astronomy.\n\n\
What is the closest star to Earth?\nA.Sirius\nB.The Sun\nC.Vega\nD.Polaris\nAnswer:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub base_url: String,
    pub checks: Vec<Check>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, result: Result<String, String>) -> Check {
    let (passed, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn complete_body() -> String {
    json!({
        "prompt": PROMPT,
        "max_tokens": 4,
        "temperature": 0.0,
        "logprob_targets": ["A", "B", "C", "D"],
    })
    .to_string()
}

fn check_completion(raw: &str) -> Result<ModelResponse, String> {
    let v: Value = serde_json::from_str(raw).map_err(|e| format!("not JSON: {e}"))?;
    if !v.get("text").is_some_and(Value::is_string) {
        return Err(format!("missing string field text: {raw}"));
    }
    let resp: ModelResponse = serde_json::from_value(v).map_err(|e| e.to_string())?;
    let lp = resp.target_logprobs.as_ref().ok_or("target_logprobs missing")?;
    for t in ["A", "B", "C", "D"] {
        let v = lp.get(t).ok_or_else(|| format!("no logprob for {t}"))?;
        if !v.is_finite() || *v > 0.0 {
            return Err(format!("logprob for {t} is {v}, expected finite and <= 0"));
        }
    }
    Ok(resp)
}

fn expect_status(r: Result<String, HttpFailure>, want: u16) -> Result<String, String> {
    match r {
        Err(HttpFailure::Status { status, .. }) if status == want => Ok(format!("HTTP {want}")),
        Err(HttpFailure::Status { status, body }) => Err(format!("expected HTTP {want}, got {status}: {body}")),
        Err(e) => Err(e.to_string()),
        Ok(body) => Err(format!("expected HTTP {want}, got 2xx: {body}")),
    }
}

/// Runs every check against `base_url`; never stops at the first failure.
pub fn run_conformance(base_url: &str) -> ConformanceReport {
    let mut cfg = HttpConfig::new(base_url);
    cfg.retry = RetryPolicy {
        max_attempts: 1,
        ..RetryPolicy::default()
    };
    let client = JsonClient::new(cfg);
    let mut checks = Vec::new();

    checks.push(check(
        "health",
        client.get("/v1/health").map(|_| "2xx".to_string()).map_err(|e| e.to_string()),
    ));

    let body = complete_body();
    let first = client.post("/v1/complete", &body).map_err(|e| e.to_string()).and_then(|r| check_completion(&r));
    checks.push(check("complete_schema", first.clone().map(|r| format!("text {:?}", r.text))));

    let second = client.post("/v1/complete", &body).map_err(|e| e.to_string()).and_then(|r| check_completion(&r));
    checks.push(check(
        "temperature0_determinism",
        match (&first, &second) {
            (Ok(a), Ok(b)) if a == b => Ok("identical responses".into()),
            (Ok(a), Ok(b)) => Err(format!("responses differ: {a:?} vs {b:?}")),
            _ => Err("completion failed".into()),
        },
    ));

    checks.push(check(
        "logprob_mass",
        first.as_ref().map_err(Clone::clone).and_then(|r| {
            let mass: f64 = r.target_logprobs.as_ref().map(|m| m.values().map(|v| v.exp()).sum()).unwrap_or(0.0);
            if mass <= 1.0 + MASS_TOLERANCE {
                Ok(format!("sum exp = {mass:.9}"))
            } else {
                Err(format!("sum exp = {mass:.9} exceeds 1"))
            }
        }),
    ));

    let embed = |text: &str| -> Result<Vec<f64>, String> {
        let raw = client
            .post("/v1/embed", &json!({ "text": text }).to_string())
            .map_err(|e| e.to_string())?;
        let r: EmbedResponse = serde_json::from_str(&raw).map_err(|e| format!("{e}: {raw}"))?;
        if r.embedding.is_empty() || r.embedding.iter().any(|v| !v.is_finite()) {
            return Err("embedding must be non-empty and finite".into());
        }
        Ok(r.embedding)
    };
    let e1 = embed("The river flows past the mill.");
    let e2 = embed("The river flows past the mill.");
    let e3 = embed("A completely different sentence about stars.");
    checks.push(check("embed_schema", e1.as_ref().map(|v| format!("dimension {}", v.len())).map_err(Clone::clone)));
    checks.push(check(
        "embed_identical_texts",
        match (&e1, &e2) {
            (Ok(a), Ok(b)) if a == b => Ok("identical vectors".into()),
            (Ok(_), Ok(_)) => Err("identical texts gave different vectors".into()),
            _ => Err("embedding failed".into()),
        },
    ));
    checks.push(check(
        "embed_dimension_constant",
        match (&e1, &e3) {
            (Ok(a), Ok(b)) if a.len() == b.len() => Ok(format!("dimension {}", a.len())),
            (Ok(a), Ok(b)) => Err(format!("dimensions {} and {}", a.len(), b.len())),
            _ => Err("embedding failed".into()),
        },
    ));

    let full_mask = json!({ "text": "two words", "attention_dropout_mask": [true, true] }).to_string();
    checks.push(check("full_mask_rejected", expect_status(client.post("/v1/embed", &full_mask), 400)));
    checks.push(check("malformed_rejected", expect_status(client.post("/v1/complete", "{"), 400)));

    ConformanceReport {
        base_url: base_url.to_string(),
        checks,
    }
}
