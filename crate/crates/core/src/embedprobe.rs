//! Embedding-similarity probe: how close does a sentence embedding stay to
//! the original when words are translated, replaced at random, or dropped?

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{creation_timestamp, CorpusDoc, DataError, TOOL_NAME, TOOL_VERSION};
use crate::evalharness::{EmbedRequest, ModelClient};
use crate::rng::RngSpec;
use crate::translate::Translator;
use crate::variantgen::{perturb, PerturbSpec};

/// Smallest sample size accepted by the normal approximation.
pub const MIN_SAMPLE: usize = 8;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("samples of size {0} and {1}; each needs at least {MIN_SAMPLE}")]
    UndersizedSample(usize, usize),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ProbeError> {
    if u.len() != v.len() {
        return Err(ProbeError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(ProbeError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Rank-sum statistic of the first sample.
    pub u: f64,
    pub z: f64,
    /// Two-sided, normal approximation with continuity and tie corrections.
    pub p_value: f64,
}

/// Midranks (1-based) of the pooled values, plus `sum(t^3 - t)` over tie groups.
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, ProbeError> {
    if a.len() < MIN_SAMPLE || b.len() < MIN_SAMPLE {
        return Err(ProbeError::UndersizedSample(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(ProbeError::Config("samples contain NaN".into()));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney { u, z: 0.0, p_value: 1.0 });
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let p_value = statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(MannWhitney { u, z, p_value })
}

/// Seeded sample of `n` documents (all of them if `n` is larger), kept in
/// corpus order.
pub fn sample_docs(docs: &[CorpusDoc], n: usize, rng: &RngSpec) -> Vec<CorpusDoc> {
    let mut idx: Vec<usize> = (0..docs.len()).collect();
    let k = n.min(docs.len());
    let mut stream = rng.stream(&["probe-sample"]);
    idx.partial_shuffle(&mut stream, k);
    let mut chosen = idx[..k].to_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| docs[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub id: String,
    /// Version label to cosine with the original embedding.
    pub cosines: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionSummary {
    pub version: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Counts over equal-width bins spanning `[-1, 1]`.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub result: Option<MannWhitney>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeManifest {
    pub tool: String,
    pub tool_version: String,
    pub provider: String,
    pub seed: u64,
    pub sample: usize,
    pub perturbations: Vec<String>,
    pub translation_backend: String,
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub manifest: ProbeManifest,
    pub versions: Vec<VersionSummary>,
    pub tests: Vec<PairTest>,
    pub rows: Vec<ProbeRow>,
    pub failures: Vec<ProbeFailure>,
}

fn summarize(version: &str, values: &[f64]) -> VersionSummary {
    let n = values.len();
    let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    let mut histogram = vec![0; HISTOGRAM_BINS];
    for v in values {
        let b = (((v + 1.0) / 2.0) * HISTOGRAM_BINS as f64).floor() as isize;
        histogram[b.clamp(0, HISTOGRAM_BINS as isize - 1) as usize] += 1;
    }
    VersionSummary {
        version: version.to_string(),
        n,
        mean,
        std,
        min: if n == 0 { 0.0 } else { values.iter().cloned().fold(f64::INFINITY, f64::min) },
        max: if n == 0 { 0.0 } else { values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) },
        histogram,
    }
}

fn probe_doc(
    doc: &CorpusDoc,
    specs: &[PerturbSpec],
    provider: &dyn ModelClient,
    rng: &RngSpec,
    translator: &Translator,
) -> Result<ProbeRow, String> {
    let embed = |text: &str, mask: Option<Vec<bool>>| {
        provider
            .embed(&EmbedRequest::new(text, mask))
            .map(|r| r.embedding)
            .map_err(|e| e.to_string())
    };
    let original = embed(&doc.text, None)?;
    let mut cosines = BTreeMap::new();
    for spec in specs {
        let p = perturb(&doc.id, &doc.text, spec, rng, translator).map_err(|e| e.to_string())?;
        let v = embed(&p.text, p.dropout_mask)?;
        let c = cosine(&original, &v).map_err(|e| e.to_string())?;
        cosines.insert(spec.to_string(), c);
    }
    Ok(ProbeRow {
        id: doc.id.clone(),
        cosines,
    })
}

/// Embeds each document and its perturbed versions, then compares the
/// cosine distributions pairwise. Provider failures drop the document.
pub fn run_probe(
    docs: &[CorpusDoc],
    specs: &[PerturbSpec],
    provider: &dyn ModelClient,
    rng: &RngSpec,
    translator: &Translator,
) -> Result<ProbeReport, ProbeError> {
    if specs.is_empty() {
        return Err(ProbeError::Config("at least one perturbation is required".into()));
    }
    let labels: Vec<String> = specs.iter().map(|s| s.to_string()).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(ProbeError::Config(format!("perturbation {l} listed twice")));
        }
    }
    let width = provider.max_concurrency().clamp(1, rayon::current_num_threads().max(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(width)
        .build()
        .map_err(|e| ProbeError::Config(e.to_string()))?;
    let results: Vec<Result<ProbeRow, ProbeFailure>> = pool.install(|| {
        docs.par_iter()
            .map(|d| {
                probe_doc(d, specs, provider, rng, translator).map_err(|error| ProbeFailure {
                    id: d.id.clone(),
                    error,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    let column = |l: &str| -> Vec<f64> { rows.iter().map(|r| r.cosines[l]).collect() };
    let versions = labels.iter().map(|l| summarize(l, &column(l))).collect();
    let mut tests = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let (a, b) = (column(&labels[i]), column(&labels[j]));
            let (result, note) = match mann_whitney_u(&a, &b) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            tests.push(PairTest {
                a: labels[i].clone(),
                b: labels[j].clone(),
                result,
                note,
            });
        }
    }
    Ok(ProbeReport {
        manifest: ProbeManifest {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            provider: provider.id(),
            seed: rng.seed,
            sample: docs.len(),
            perturbations: labels,
            translation_backend: translator.backend_id().to_string(),
            details: BTreeMap::new(),
            created_at: creation_timestamp(),
        },
        versions,
        tests,
        rows,
        failures,
    })
}

impl ProbeReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend(self.manifest.perturbations.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.id.clone()];
            rec.extend(self.manifest.perturbations.iter().map(|l| format!("{:.12}", r.cosines[l])));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn histogram_svg(&self) -> String {
        let categories: Vec<String> = (0..HISTOGRAM_BINS)
            .map(|b| format!("{:.1}", -1.0 + 2.0 * b as f64 / HISTOGRAM_BINS as f64))
            .collect();
        let series: Vec<(String, Vec<Option<f64>>)> = self
            .versions
            .iter()
            .map(|v| {
                let n = v.n.max(1) as f64;
                (v.version.clone(), v.histogram.iter().map(|c| Some(*c as f64 / n)).collect())
            })
            .collect();
        crate::plot::grouped_bars("cosine to original (share of documents per bin)", &categories, &series, 1.0)
    }

    /// Writes `out` (JSON) plus `.csv` and `.svg` siblings.
    pub fn write_all(&self, out: &Path) -> Result<(), DataError> {
        crate::evalharness::write_pretty(out, self)?;
        let csv_path = out.with_extension("csv");
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| DataError::io(&csv_path, e))?;
        let svg_path = out.with_extension("svg");
        std::fs::write(&svg_path, self.histogram_svg()).map_err(|e| DataError::io(&svg_path, e))
    }
}

/// Human-readable one-line-per-test digest.
pub fn describe_tests(report: &ProbeReport) -> String {
    let mut s = String::new();
    for t in &report.tests {
        match &t.result {
            Some(r) => {
                let _ = writeln!(s, "{} vs {}: U={:.1} z={:.3} p={:.3e}", t.a, t.b, r.u, r.z, r.p_value);
            }
            None => {
                let _ = writeln!(s, "{} vs {}: {}", t.a, t.b, t.note.as_deref().unwrap_or("not tested"));
            }
        }
    }
    s
}
