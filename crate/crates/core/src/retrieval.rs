//! Okapi BM25 ranking and keyword matching for carving domain-specific
//! subsets out of a general corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{read_jsonl, write_jsonl, CorpusDoc, DataError, DatasetManifest};
use crate::unitsplit;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("unknown document id {0:?}")]
    UnknownDoc(String),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("keyword {0:?} listed more than once")]
    DuplicateKeyword(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// Non-positive IDFs are replaced by `epsilon * mean(positive IDFs)`.
    pub epsilon: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.5,
            b: 0.75,
            epsilon: 0.25,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k1.is_nan() || self.k1 <= 0.0 {
            return Err(RetrievalError::InvalidParams(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(RetrievalError::InvalidParams(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Lowercase, then split on the word rule shared with unit splitting.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    unitsplit::words(&lower).into_iter().map(str::to_string).collect()
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_ids: Vec<String>,
    position: HashMap<String, usize>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
    df: HashMap<String, usize>,
    /// Term to `(doc index, term frequency)`, ascending doc index.
    postings: HashMap<String, Vec<(usize, usize)>>,
}

impl Bm25Index {
    pub fn build(docs: &[CorpusDoc]) -> Result<Self, RetrievalError> {
        if docs.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let per_doc: Vec<(usize, BTreeMap<String, usize>)> = docs
            .par_iter()
            .map(|d| {
                let tokens = tokenize(&d.text);
                let mut tf = BTreeMap::new();
                for t in &tokens {
                    *tf.entry(t.clone()).or_insert(0) += 1;
                }
                (tokens.len(), tf)
            })
            .collect();

        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut df = HashMap::new();
        let mut postings: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        for (i, (len, tf)) in per_doc.into_iter().enumerate() {
            doc_lengths.push(len);
            for (term, count) in tf {
                *df.entry(term.clone()).or_insert(0) += 1;
                postings.entry(term).or_default().push((i, count));
            }
        }
        let avgdl = doc_lengths.iter().sum::<usize>() as f64 / docs.len() as f64;
        let doc_ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
        let position = doc_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            doc_ids,
            position,
            doc_lengths,
            avgdl,
            df,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.position.get(doc_id).map(|&i| self.doc_lengths[i])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn term_freq(&self, term: &str, doc_id: &str) -> usize {
        let Some(&i) = self.position.get(doc_id) else { return 0 };
        self.postings
            .get(term)
            .and_then(|p| p.binary_search_by_key(&i, |&(d, _)| d).ok().map(|j| p[j].1))
            .unwrap_or(0)
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    fn raw_idf(&self, n_t: usize) -> f64 {
        let n = self.len() as f64;
        let n_t = n_t as f64;
        ((n - n_t + 0.5) / (n_t + 0.5)).ln()
    }

    /// IDF for every indexed term with the floor applied.
    pub fn idf_table(&self, params: &Bm25Params) -> HashMap<&str, f64> {
        let raw: Vec<(&str, f64)> = self.df.iter().map(|(t, &n)| (t.as_str(), self.raw_idf(n))).collect();
        let positive: Vec<f64> = raw.iter().map(|&(_, v)| v).filter(|v| *v > 0.0).collect();
        let mean_pos = if positive.is_empty() {
            0.0
        } else {
            positive.iter().sum::<f64>() / positive.len() as f64
        };
        let floor = params.epsilon * mean_pos;
        raw.into_iter().map(|(t, v)| (t, if v > 0.0 { v } else { floor })).collect()
    }

    /// Scores of every document for the query, indexed like the corpus.
    /// Repeated query tokens count once per occurrence.
    pub fn scores(&self, params: &Bm25Params, query_tokens: &[String]) -> Vec<f64> {
        let idf = self.idf_table(params);
        let mut qcount: BTreeMap<&str, usize> = BTreeMap::new();
        for t in query_tokens {
            *qcount.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut scores = vec![0.0; self.len()];
        for (term, mult) in qcount {
            let (Some(w), Some(post)) = (idf.get(term), self.postings.get(term)) else { continue };
            for &(d, f) in post {
                let f = f as f64;
                let norm = params.k1 * (1.0 - params.b + params.b * self.doc_lengths[d] as f64 / self.avgdl);
                scores[d] += mult as f64 * w * f * (params.k1 + 1.0) / (f + norm);
            }
        }
        scores
    }

    /// Indices in rank order: score descending, ties by ascending doc id.
    pub fn rank(&self, scores: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| self.doc_ids[a].cmp(&self.doc_ids[b]))
        });
        order
    }
}

pub fn bm25_score(
    index: &Bm25Index,
    params: &Bm25Params,
    query_tokens: &[String],
    doc_id: &str,
) -> Result<f64, RetrievalError> {
    let &i = index
        .position
        .get(doc_id)
        .ok_or_else(|| RetrievalError::UnknownDoc(doc_id.to_string()))?;
    Ok(index.scores(params, query_tokens)[i])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSubsetSpec {
    pub top_k: usize,
    pub keywords: Vec<String>,
}

impl DomainSubsetSpec {
    pub fn new(top_k: usize, keywords: Vec<String>) -> Result<Self, RetrievalError> {
        let mut seen = BTreeSet::new();
        for k in &keywords {
            if !seen.insert(k.as_str()) {
                return Err(RetrievalError::DuplicateKeyword(k.clone()));
            }
        }
        Ok(Self { top_k, keywords })
    }
}

/// Case-sensitive exact substring match against any keyword.
pub fn contains_keyword(text: &str, keywords: &[String]) -> bool {
    keywords.iter().any(|k| !k.is_empty() && text.contains(k.as_str()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub corpus_size: usize,
    pub top_k: usize,
    pub topk_size: usize,
    pub keyword_size: usize,
    pub overlap: usize,
    pub final_size: usize,
    pub params: Bm25Params,
}

/// Union of the BM25 top-k and all keyword-matching documents, in corpus order.
pub fn build_domain_subset(
    docs: &[CorpusDoc],
    query_doc: &str,
    spec: &DomainSubsetSpec,
    params: &Bm25Params,
) -> Result<(Vec<CorpusDoc>, RetrievalReport), RetrievalError> {
    params.validate()?;
    let index = Bm25Index::build(docs)?;
    let scores = index.scores(params, &tokenize(query_doc));
    let top: BTreeSet<usize> = index.rank(&scores).into_iter().take(spec.top_k).collect();
    let keyword: BTreeSet<usize> = docs
        .par_iter()
        .enumerate()
        .filter(|(_, d)| contains_keyword(&d.text, &spec.keywords))
        .map(|(i, _)| i)
        .collect();
    let union: BTreeSet<usize> = top.union(&keyword).copied().collect();
    let report = RetrievalReport {
        corpus_size: docs.len(),
        top_k: spec.top_k,
        topk_size: top.len(),
        keyword_size: keyword.len(),
        overlap: top.intersection(&keyword).count(),
        final_size: union.len(),
        params: *params,
    };
    debug_assert_eq!(report.final_size, report.topk_size + report.keyword_size - report.overlap);
    let subset = union.into_iter().map(|i| docs[i].clone()).collect();
    Ok((subset, report))
}

/// `(k, documents among the top k that contain a keyword)` for each k.
pub fn keyword_recall_curve(
    docs: &[CorpusDoc],
    query_doc: &str,
    keywords: &[String],
    params: &Bm25Params,
    k_values: &[usize],
) -> Result<Vec<(usize, usize)>, RetrievalError> {
    params.validate()?;
    let index = Bm25Index::build(docs)?;
    let order = index.rank(&index.scores(params, &tokenize(query_doc)));
    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0usize);
    for &i in &order {
        let hit = contains_keyword(&docs[i].text, keywords) as usize;
        prefix.push(prefix.last().unwrap() + hit);
    }
    Ok(k_values.iter().map(|&k| (k, prefix[k.min(order.len())])).collect())
}

/// One keyword per line; blank lines ignored, surrounding whitespace kept
/// verbatim apart from the line terminator.
pub fn load_keywords(path: &Path) -> Result<Vec<String>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

/// File-level retrieval: writes the subset, its manifest and the report.
pub fn retrieve_files(
    corpus_path: &Path,
    query_path: &Path,
    keywords_path: Option<&Path>,
    top_k: usize,
    params: &Bm25Params,
    out_path: &Path,
    report_path: &Path,
) -> Result<RetrievalReport, RetrievalError> {
    let docs: Vec<CorpusDoc> = read_jsonl(corpus_path)?;
    let query = std::fs::read_to_string(query_path).map_err(|e| DataError::io(query_path, e))?;
    let keywords = match keywords_path {
        Some(p) => load_keywords(p)?,
        None => Vec::new(),
    };
    let spec = DomainSubsetSpec::new(top_k, keywords)?;
    let (subset, report) = build_domain_subset(&docs, &query, &spec, params)?;
    write_jsonl(out_path, &subset)?;

    let mut manifest = DatasetManifest::for_source("retrieve", corpus_path)?;
    let bytes = query.as_bytes();
    manifest
        .details
        .insert("query_sha256".into(), crate::datamodel::sha256_hex(bytes).into());
    manifest.details.insert(
        "report".into(),
        serde_json::to_value(&report).expect("report serializes"),
    );
    manifest.finish(out_path, subset.len())?;

    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(report_path, text).map_err(|e| DataError::io(report_path, e))?;
    Ok(report)
}
