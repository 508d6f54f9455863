//! Prompt rendering, model querying, answer extraction and accuracy reports
//! for multiple-choice and open-ended evaluation.

pub mod client;
mod extract;
mod merge;
pub mod mock;
mod prompt;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use client::{EmbedRequest, EmbedResponse, HttpModelClient, ModelClient, ModelError, ModelRequest, ModelResponse};
pub use extract::{
    extract_after_last_answer, extract_answer_firsttoken, extract_answer_maxprob, first_token_of, rouge_l,
    FirstToken, MaxProbChoice, RougeScore,
};
pub use merge::{merge_reports, template_label, MergedReport, MergedRow, BASELINE_VARIANT};
pub use mock::{build_model, handle_wire_request, Knowledge, MockModel, MockModelSpec, EMBED_DIM};
pub use prompt::{
    parse_option_lines, render_prompt, Demo, DemoPool, DemoStrategy, DemoTransform, Instruction, OptionIds,
    PromptTemplate,
};

use crate::datamodel::{
    creation_timestamp, read_jsonl, sha256_hex, DataError, DatasetManifest, DomainCategory, McqField, McqItem,
    QaItem, TOOL_NAME, TOOL_VERSION,
};

/// Languages averaged into the `*` summary row.
pub const STAR_LANGUAGES: [&str; 4] = ["fr", "de", "es", "it"];
pub const STAR: &str = "*";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Config(String),
    #[error("demonstrations: {0}")]
    Demos(String),
    #[error("answer strategy unavailable: {0}")]
    StrategyUnavailable(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    MaxProb,
    FirstToken,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::MaxProb => "maxprob",
            Strategy::FirstToken => "firsttoken",
        })
    }
}

impl FromStr for Strategy {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "maxprob" => Ok(Strategy::MaxProb),
            "firsttoken" => Ok(Strategy::FirstToken),
            other => Err(EvalError::Config(format!("unknown strategy {other:?}; expected maxprob or firsttoken"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub template: PromptTemplate,
    pub strategy: Strategy,
    pub max_tokens: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            template: PromptTemplate::default(),
            strategy: Strategy::MaxProb,
            max_tokens: 8,
        }
    }
}

/// An MCQ dataset plus the provenance facts reports are keyed on.
#[derive(Debug, Clone)]
pub struct EvalDataset {
    pub items: Vec<McqItem>,
    pub path: String,
    pub sha256: String,
    pub dataset_id: String,
    pub variant: String,
}

impl EvalDataset {
    /// Reads the items and, if present, the sidecar manifest.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let items: Vec<McqItem> = read_jsonl(path)?;
        let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
        let sha256 = sha256_hex(&bytes);
        let manifest = DatasetManifest::load_sidecar(path)?;
        Ok(Self {
            items,
            path: path.display().to_string(),
            dataset_id: manifest.as_ref().map(|m| m.dataset_id.clone()).unwrap_or_else(|| sha256[..16].to_string()),
            variant: manifest.and_then(|m| m.variant).unwrap_or_else(|| "original".to_string()),
            sha256,
        })
    }

    pub fn from_items(items: Vec<McqItem>, variant: &str) -> Self {
        let bytes = crate::datamodel::to_jsonl_string(&items);
        let sha256 = sha256_hex(bytes.as_bytes());
        Self {
            items,
            path: String::new(),
            dataset_id: sha256[..16].to_string(),
            sha256,
            variant: variant.to_string(),
        }
    }
}

/// Language an item is reported under: its single non-English language if
/// exactly one appears, `en` if none, `mixed` otherwise.
pub fn item_language(item: &McqItem) -> String {
    let others: BTreeSet<&str> = McqField::ALL
        .iter()
        .map(|f| item.field_lang(*f).as_str())
        .filter(|l| *l != "en")
        .collect();
    match others.len() {
        0 => "en".to_string(),
        1 => others.into_iter().next().unwrap().to_string(),
        _ => "mixed".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPrediction {
    pub id: String,
    pub subject: String,
    pub domain_category: DomainCategory,
    pub language: String,
    pub answer: usize,
    pub predicted: Option<usize>,
    pub correct: bool,
    #[serde(default)]
    pub tie: bool,
    #[serde(default)]
    pub unparseable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    /// Items in the group.
    pub n: usize,
    /// Items that got a model answer (`n - failed`); accuracy denominator.
    pub evaluated: usize,
    pub correct: usize,
    pub failed: usize,
    pub unparseable: usize,
    pub ties: usize,
}

impl Tally {
    fn add(&mut self, p: &ItemPrediction) {
        self.n += 1;
        if p.error.is_some() {
            self.failed += 1;
            return;
        }
        self.evaluated += 1;
        self.correct += p.correct as usize;
        self.unparseable += p.unparseable as usize;
        self.ties += p.tie as usize;
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.correct as f64 / self.evaluated as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: String,
    pub language: String,
    pub subject: String,
    pub domain_category: DomainCategory,
    #[serde(flatten)]
    pub tally: Tally,
    pub accuracy: Option<f64>,
    /// English accuracy of the same variant and subject minus this accuracy.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub language: String,
    #[serde(flatten)]
    pub tally: Tally,
    pub accuracy: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalManifest {
    pub tool: String,
    pub tool_version: String,
    pub task: String,
    pub dataset_path: String,
    pub dataset_sha256: String,
    pub dataset_id: String,
    pub variant: String,
    pub model: String,
    pub options: EvalOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_path: Option<String>,
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub manifest: EvalManifest,
    pub totals: Tally,
    pub summary: Vec<SummaryRow>,
    pub cells: Vec<Cell>,
    pub predictions: Vec<ItemPrediction>,
}

impl EvalReport {
    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        write_pretty(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DataError::Schema {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn summary_accuracy(&self, language: &str) -> Option<f64> {
        self.summary.iter().find(|r| r.language == language).and_then(|r| r.accuracy)
    }
}

pub(crate) fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| DataError::io(path, e))
}

fn predict_one(
    item: &McqItem,
    opts: &EvalOptions,
    demos: &[Demo],
    model: &dyn ModelClient,
) -> Result<ItemPrediction, EvalError> {
    let prompt = render_prompt(item, &opts.template, demos)?;
    let ids = opts.template.option_ids.ids();
    let mut req = ModelRequest::greedy(prompt, opts.max_tokens);
    if opts.strategy == Strategy::MaxProb {
        req.logprob_targets = Some(opts.template.option_ids.targets());
    }
    let mut pred = ItemPrediction {
        id: item.id.clone(),
        subject: item.subject.clone(),
        domain_category: item.domain_category,
        language: item_language(item),
        answer: item.answer,
        predicted: None,
        correct: false,
        tie: false,
        unparseable: false,
        error: None,
    };
    let resp = match model.complete(&req) {
        Ok(r) => r,
        Err(e) => {
            pred.error = Some(e.to_string());
            return Ok(pred);
        }
    };
    match opts.strategy {
        Strategy::MaxProb => {
            let c = extract_answer_maxprob(&resp, &ids)?;
            pred.predicted = Some(c.index);
            pred.tie = c.tie;
        }
        Strategy::FirstToken => {
            let parsed = if opts.template.demo_strategy == DemoStrategy::TranslateThenAnswer {
                extract_after_last_answer(&resp.text, &ids)
            } else {
                extract_answer_firsttoken(&resp, &ids)
            };
            match parsed {
                FirstToken::Choice(i) => pred.predicted = Some(i),
                FirstToken::Unparseable => pred.unparseable = true,
            }
        }
    }
    pred.correct = pred.predicted == Some(item.answer);
    Ok(pred)
}

/// Runs `f` on a pool no wider than the model's concurrency bound.
fn with_bounded_pool<T: Send>(width: usize, f: impl FnOnce() -> T + Send) -> T {
    let n = width.clamp(1, rayon::current_num_threads().max(1));
    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn aggregate(variant: &str, predictions: &[ItemPrediction]) -> (Tally, Vec<SummaryRow>, Vec<Cell>) {
    let mut totals = Tally::default();
    let mut cells: BTreeMap<(String, String, DomainCategory), Tally> = BTreeMap::new();
    let mut by_lang: BTreeMap<String, Tally> = BTreeMap::new();
    for p in predictions {
        totals.add(p);
        cells
            .entry((p.language.clone(), p.subject.clone(), p.domain_category))
            .or_default()
            .add(p);
        by_lang.entry(p.language.clone()).or_default().add(p);
    }
    let en_cell = |subject: &str, d: DomainCategory| {
        cells.get(&("en".to_string(), subject.to_string(), d)).and_then(Tally::accuracy)
    };
    let cell_rows = cells
        .iter()
        .map(|((lang, subject, d), t)| {
            let acc = t.accuracy();
            Cell {
                variant: variant.to_string(),
                language: lang.clone(),
                subject: subject.clone(),
                domain_category: *d,
                tally: t.clone(),
                accuracy: acc,
                delta: en_cell(subject, *d).zip(acc).map(|(e, a)| e - a),
            }
        })
        .collect();

    let en = by_lang.get("en").and_then(Tally::accuracy);
    let mut summary: Vec<SummaryRow> = by_lang
        .iter()
        .map(|(lang, t)| SummaryRow {
            variant: variant.to_string(),
            language: lang.clone(),
            tally: t.clone(),
            accuracy: t.accuracy(),
            delta: en.zip(t.accuracy()).map(|(e, a)| e - a),
        })
        .collect();
    let star: Vec<&SummaryRow> = summary
        .iter()
        .filter(|r| STAR_LANGUAGES.contains(&r.language.as_str()) && r.accuracy.is_some())
        .collect();
    if !star.is_empty() {
        let mut tally = Tally::default();
        for r in &star {
            tally.n += r.tally.n;
            tally.evaluated += r.tally.evaluated;
            tally.correct += r.tally.correct;
            tally.failed += r.tally.failed;
            tally.unparseable += r.tally.unparseable;
            tally.ties += r.tally.ties;
        }
        let acc = star.iter().filter_map(|r| r.accuracy).sum::<f64>() / star.len() as f64;
        summary.push(SummaryRow {
            variant: variant.to_string(),
            language: STAR.to_string(),
            tally,
            accuracy: Some(acc),
            delta: en.map(|e| e - acc),
        });
    }
    (totals, summary, cell_rows)
}

/// Evaluates every item once. Per-item model failures are recorded and
/// excluded from accuracy; an unavailable answer strategy aborts the run.
pub fn run_eval(
    dataset: &EvalDataset,
    opts: &EvalOptions,
    demos: &DemoPool,
    model: &dyn ModelClient,
) -> Result<EvalReport, EvalError> {
    opts.template.validate()?;
    if opts.strategy == Strategy::MaxProb && opts.template.demo_strategy == DemoStrategy::TranslateThenAnswer {
        return Err(EvalError::Config(
            "translate-then-answer prompts end in a restated question; use --strategy firsttoken".into(),
        ));
    }
    let predictions: Vec<ItemPrediction> = with_bounded_pool(model.max_concurrency(), || {
        dataset
            .items
            .par_iter()
            .map(|item| {
                let d = demos.for_subject(&item.subject)?;
                predict_one(item, opts, d, model)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let (totals, summary, cells) = aggregate(&dataset.variant, &predictions);
    Ok(EvalReport {
        manifest: EvalManifest {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            task: "mcq".to_string(),
            dataset_path: dataset.path.clone(),
            dataset_sha256: dataset.sha256.clone(),
            dataset_id: dataset.dataset_id.clone(),
            variant: dataset.variant.clone(),
            model: model.id(),
            options: *opts,
            dev_path: None,
            details: BTreeMap::new(),
            created_at: creation_timestamp(),
        },
        totals,
        summary,
        cells,
        predictions,
    })
}

/// Open-ended prompt: the question followed by an answer cue.
pub fn render_qa_prompt(item: &QaItem) -> String {
    format!("Question: {}\nAnswer:", item.question)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPrediction {
    pub id: String,
    pub language: String,
    pub response: Option<String>,
    pub rouge: Option<RougeScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaSummaryRow {
    pub language: String,
    pub n: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub manifest: EvalManifest,
    pub summary: Vec<QaSummaryRow>,
    pub predictions: Vec<QaPrediction>,
}

impl QaReport {
    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        write_pretty(path, self)
    }
}

/// Scores free-form answers with ROUGE-L against the English reference.
pub fn run_qa_eval(
    path: &Path,
    items: &[QaItem],
    max_tokens: usize,
    model: &dyn ModelClient,
) -> Result<QaReport, EvalError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    let sha256 = sha256_hex(&bytes);
    let dataset_id = DatasetManifest::load_sidecar(path)?
        .map(|m| m.dataset_id)
        .unwrap_or_else(|| sha256[..16].to_string());
    let predictions: Vec<QaPrediction> = with_bounded_pool(model.max_concurrency(), || {
        items
            .par_iter()
            .map(|it| {
                let req = ModelRequest::greedy(render_qa_prompt(it), max_tokens);
                match model.complete(&req) {
                    Ok(r) => QaPrediction {
                        id: it.id.clone(),
                        language: it.lang.to_string(),
                        rouge: Some(rouge_l(&r.text, &it.reference_answer)),
                        response: Some(r.text),
                        error: None,
                    },
                    Err(e) => QaPrediction {
                        id: it.id.clone(),
                        language: it.lang.to_string(),
                        response: None,
                        rouge: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    let mut groups: BTreeMap<&str, Vec<&QaPrediction>> = BTreeMap::new();
    for p in &predictions {
        groups.entry(p.language.as_str()).or_default().push(p);
    }
    let summary = groups
        .into_iter()
        .map(|(lang, ps)| {
            let scored: Vec<&RougeScore> = ps.iter().filter_map(|p| p.rouge.as_ref()).collect();
            let mean = |f: fn(&RougeScore) -> f64| {
                (!scored.is_empty()).then(|| scored.iter().map(|r| f(r)).sum::<f64>() / scored.len() as f64)
            };
            QaSummaryRow {
                language: lang.to_string(),
                n: ps.len(),
                evaluated: scored.len(),
                failed: ps.len() - scored.len(),
                mean_precision: mean(|r| r.precision),
                mean_recall: mean(|r| r.recall),
                mean_f1: mean(|r| r.f1),
            }
        })
        .collect();
    Ok(QaReport {
        manifest: EvalManifest {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            task: "qa".to_string(),
            dataset_path: path.display().to_string(),
            dataset_sha256: sha256,
            dataset_id,
            variant: "original".to_string(),
            model: model.id(),
            options: EvalOptions {
                max_tokens,
                strategy: Strategy::FirstToken,
                ..EvalOptions::default()
            },
            dev_path: None,
            details: BTreeMap::new(),
            created_at: creation_timestamp(),
        },
        summary,
        predictions,
    })
}
