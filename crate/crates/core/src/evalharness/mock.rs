//! Deterministic in-process models.
//!
//! | name | completion behaviour |
//! |------|----------------------|
//! | `mock:always-correct` | picks the known answer of the item whose options appear last in the prompt |
//! | `mock:uniform-random[:SEED]` | per-prompt pseudo-random option, seeded |
//! | `mock:english-anchored` | scores each option 3 (untagged, equals the known answer text), 1 (untagged otherwise) or 0 (carries a mock translation tag); argmax, lowest index on ties |
//! | `mock:echo` | returns the prompt; uniform option logprobs |
//! | `mock:hash`, `mock:bow` | echo completions; see embeddings below |
//!
//! Embeddings: `mock:bow` sums a pseudo-random vector per lowercase word,
//! skips masked words, and adds a small language-specific offset to a word
//! directly preceded by a `⟦xx⟧` tag. Every other mock hashes the exact text
//! and mask into a vector. Dimension is [`EMBED_DIM`].
//!
//! "Known answers" come from a [`Knowledge`] table keyed by the de-tagged
//! options, normally built from the evaluation dataset itself.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use super::client::{EmbedRequest, EmbedResponse, ModelClient, ModelError, ModelRequest, ModelResponse};
use super::prompt::parse_option_lines;
use crate::datamodel::{McqItem, QaItem};
use crate::rng::RngSpec;
use crate::translate::{mock_tag_language, strip_mock_tags};
use crate::unitsplit;

pub const EMBED_DIM: usize = 64;
/// Log-probability reported for targets that match no option line.
const UNMATCHED_LOGPROB: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockModelSpec {
    AlwaysCorrect,
    UniformRandom { seed: u64 },
    EnglishAnchored,
    Echo,
    HashEmbed,
    BowEmbed,
}

impl fmt::Display for MockModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockModelSpec::AlwaysCorrect => f.write_str("mock:always-correct"),
            MockModelSpec::UniformRandom { seed } => write!(f, "mock:uniform-random:{seed}"),
            MockModelSpec::EnglishAnchored => f.write_str("mock:english-anchored"),
            MockModelSpec::Echo => f.write_str("mock:echo"),
            MockModelSpec::HashEmbed => f.write_str("mock:hash"),
            MockModelSpec::BowEmbed => f.write_str("mock:bow"),
        }
    }
}

impl FromStr for MockModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let rest = s.strip_prefix("mock:").ok_or_else(|| format!("{s:?} is not a mock model"))?;
        let (name, arg) = match rest.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (rest, None),
        };
        let spec = match (name, arg) {
            ("always-correct", None) => MockModelSpec::AlwaysCorrect,
            ("uniform-random", a) => MockModelSpec::UniformRandom {
                seed: a.map(str::parse).transpose().map_err(|_| format!("bad seed in {s:?}"))?.unwrap_or(0),
            },
            ("english-anchored", None) => MockModelSpec::EnglishAnchored,
            ("echo", None) => MockModelSpec::Echo,
            ("hash", None) => MockModelSpec::HashEmbed,
            ("bow", None) => MockModelSpec::BowEmbed,
            _ => {
                return Err(format!(
                    "unknown mock model {s:?}; expected always-correct, uniform-random[:SEED], english-anchored, echo, hash or bow"
                ))
            }
        };
        Ok(spec)
    }
}

/// What a mock "knows": answers of MCQ items (keyed by de-tagged options)
/// and of open questions (keyed by de-tagged question).
#[derive(Debug, Clone, Default)]
pub struct Knowledge {
    mcq: HashMap<[String; 4], usize>,
    qa: HashMap<String, String>,
}

impl Knowledge {
    pub fn from_mcq(items: &[McqItem]) -> Self {
        let mut k = Self::default();
        k.add_mcq(items);
        k
    }

    pub fn add_mcq(&mut self, items: &[McqItem]) {
        for it in items {
            self.mcq.insert(it.options.clone().map(|o| strip_mock_tags(&o)), it.answer);
        }
    }

    pub fn add_qa(&mut self, items: &[QaItem]) {
        for it in items {
            self.qa.insert(strip_mock_tags(&it.question), strip_mock_tags(&it.reference_answer));
        }
    }

    /// Known answer index and text for options as displayed.
    pub fn lookup(&self, shown: &[String; 4]) -> Option<(usize, String)> {
        let key = shown.clone().map(|o| strip_mock_tags(&o));
        self.mcq.get(&key).map(|&i| (i, key[i].clone()))
    }

    pub fn qa_answer(&self, question: &str) -> Option<&str> {
        self.qa.get(&strip_mock_tags(question)).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct MockModel {
    spec: MockModelSpec,
    knowledge: Arc<Knowledge>,
}

fn log_softmax(scores: &[f64; 4]) -> [f64; 4] {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    scores.map(|s| s - lse)
}

fn argmax(scores: &[f64; 4]) -> usize {
    (1..4).fold(0, |best, i| if scores[i] > scores[best] { i } else { best })
}

/// Pseudo-random vector in `[-1, 1]^dim` determined by the labels.
fn hashed_vector(labels: &[&str]) -> Vec<f64> {
    let mut s = RngSpec::new(0).stream(labels);
    (0..EMBED_DIM).map(|_| s.random_range(-1.0..1.0)).collect()
}

impl MockModel {
    pub fn new(spec: MockModelSpec, knowledge: Arc<Knowledge>) -> Self {
        Self { spec, knowledge }
    }

    pub fn spec(&self) -> MockModelSpec {
        self.spec
    }

    /// Option scores for the last option block of the prompt.
    fn scores(&self, prompt: &str, options: &[String; 4]) -> [f64; 4] {
        match self.spec {
            MockModelSpec::AlwaysCorrect => {
                let gt = self.knowledge.lookup(options).map(|(i, _)| i).unwrap_or(0);
                std::array::from_fn(|i| if i == gt { 1.0 } else { 0.0 })
            }
            MockModelSpec::UniformRandom { seed } => {
                let mut s = RngSpec::new(seed).stream(&["uniform-random", prompt]);
                std::array::from_fn(|_| s.random_range(0.0..4.0))
            }
            MockModelSpec::EnglishAnchored => {
                let gt = self.knowledge.lookup(options).map(|(_, t)| t);
                options.clone().map(|o| {
                    if mock_tag_language(&o).is_some() || o.contains('⟦') {
                        0.0
                    } else if gt.as_deref() == Some(o.as_str()) {
                        3.0
                    } else {
                        1.0
                    }
                })
            }
            MockModelSpec::Echo | MockModelSpec::HashEmbed | MockModelSpec::BowEmbed => [0.0; 4],
        }
    }

    fn answer_open(&self, prompt: &str) -> String {
        let question = prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("Question: "))
            .unwrap_or(prompt);
        let known = self.knowledge.qa_answer(question);
        match self.spec {
            MockModelSpec::AlwaysCorrect => known.unwrap_or("").to_string(),
            MockModelSpec::EnglishAnchored if !question.contains('⟦') => known.unwrap_or("").to_string(),
            MockModelSpec::EnglishAnchored => "I do not know.".to_string(),
            MockModelSpec::UniformRandom { seed } => {
                let mut s = RngSpec::new(seed).stream(&["uniform-random-qa", prompt]);
                let words: Vec<&str> = unitsplit::words(prompt);
                (0..3)
                    .map(|_| words.get(s.random_range(0..words.len().max(1))).copied().unwrap_or(""))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
            _ => prompt.to_string(),
        }
    }

    fn bow_embedding(&self, text: &str, mask: Option<&[bool]>) -> Vec<f64> {
        let mut v = vec![0.0; EMBED_DIM];
        let mut pending_lang: Option<&str> = None;
        let mut any = false;
        for (i, (s, e)) in unitsplit::word_spans(text).into_iter().enumerate() {
            let w = &text[s..e];
            if text[..s].ends_with('⟦') && text[e..].starts_with('⟧') {
                pending_lang = Some(w);
                continue;
            }
            let lang = pending_lang.take();
            if mask.is_some_and(|m| m[i]) {
                continue;
            }
            any = true;
            let lower = w.to_lowercase();
            for (acc, x) in v.iter_mut().zip(hashed_vector(&["bow", &lower])) {
                *acc += x;
            }
            if let Some(l) = lang {
                for (acc, x) in v.iter_mut().zip(hashed_vector(&["bow-lang", l, &lower])) {
                    *acc += 0.1 * x;
                }
            }
        }
        if !any {
            return hashed_vector(&["bow-empty"]);
        }
        v
    }
}

impl ModelClient for MockModel {
    fn id(&self) -> String {
        self.spec.to_string()
    }

    fn max_concurrency(&self) -> usize {
        8
    }

    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        req.validate().map_err(ModelError::InvalidRequest)?;
        let parsed = parse_option_lines(&req.prompt);
        let (text, option_lp) = match (&parsed, self.spec) {
            (_, MockModelSpec::Echo | MockModelSpec::HashEmbed | MockModelSpec::BowEmbed) => {
                (req.prompt.clone(), parsed.as_ref().map(|(ids, _)| (*ids, [0.25f64.ln(); 4])))
            }
            (Some((ids, options)), _) => {
                let scores = self.scores(&req.prompt, options);
                (ids.ids()[argmax(&scores)].to_string(), Some((*ids, log_softmax(&scores))))
            }
            (None, _) => (self.answer_open(&req.prompt), None),
        };
        let target_logprobs = req.logprob_targets.as_ref().map(|targets| {
            targets
                .iter()
                .map(|t| {
                    let lp = match &option_lp {
                        Some((ids, lp)) => ids.ids().iter().position(|id| id == t).map(|j| lp[j]),
                        None => Some(-(targets.len() as f64).ln()),
                    };
                    (t.clone(), lp.unwrap_or(UNMATCHED_LOGPROB))
                })
                .collect()
        });
        Ok(ModelResponse { text, target_logprobs })
    }

    fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, ModelError> {
        req.validate().map_err(ModelError::InvalidRequest)?;
        let mask = req.attention_dropout_mask.as_deref();
        let embedding = match self.spec {
            MockModelSpec::BowEmbed => self.bow_embedding(&req.text, mask),
            _ => {
                let m: String = mask
                    .map(|m| m.iter().map(|b| if *b { '1' } else { '0' }).collect())
                    .unwrap_or_default();
                hashed_vector(&["hash", &req.text, &m])
            }
        };
        Ok(EmbedResponse { embedding })
    }
}

/// Parses a model address: `mock:<name>` or `http:URL` / bare `http(s)://URL`.
pub fn build_model(spec: &str, knowledge: Arc<Knowledge>) -> Result<Arc<dyn ModelClient>, String> {
    if spec.starts_with("mock:") {
        let m: MockModelSpec = spec.parse()?;
        return Ok(Arc::new(MockModel::new(m, knowledge)));
    }
    let url = spec.strip_prefix("http:").filter(|u| u.starts_with("http")).unwrap_or(spec);
    if url.starts_with("http://") || url.starts_with("https://") {
        return Ok(Arc::new(super::client::HttpModelClient::new(crate::http::HttpConfig::new(url))));
    }
    Err(format!("model {spec:?} must be mock:<name> or http:URL"))
}

/// Transport-independent handler for the wire protocol, for embedding a
/// model behind any HTTP server. Returns `(status, JSON body)`.
pub fn handle_wire_request(model: &dyn ModelClient, method: &str, path: &str, body: &str) -> (u16, String) {
    fn err(status: u16, msg: impl fmt::Display) -> (u16, String) {
        (status, serde_json::json!({ "error": msg.to_string() }).to_string())
    }
    fn reply<T: serde::Serialize>(r: Result<T, ModelError>) -> (u16, String) {
        match r {
            Ok(v) => (200, serde_json::to_string(&v).expect("response serializes")),
            Err(ModelError::InvalidRequest(m)) => err(400, m),
            Err(ModelError::Unsupported(m)) => err(404, m),
            Err(e) => err(500, e),
        }
    }
    match (method, path) {
        ("GET", "/v1/health") => (200, r#"{"status":"ok"}"#.to_string()),
        ("POST", "/v1/complete") => match serde_json::from_str::<ModelRequest>(body) {
            Ok(req) => reply(model.complete(&req)),
            Err(e) => err(400, e),
        },
        ("POST", "/v1/embed") => match serde_json::from_str::<EmbedRequest>(body) {
            Ok(req) => reply(model.embed(&req)),
            Err(e) => err(400, e),
        },
        _ => err(404, format!("no route for {method} {path}")),
    }
}
