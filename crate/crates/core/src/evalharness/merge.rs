//! Merging several MCQ reports of one dataset into a single table.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport, PromptTemplate, STAR};
use crate::datamodel::DataError;

/// Variant whose English rows anchor every delta.
pub const BASELINE_VARIANT: &str = "original";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedRow {
    pub model: String,
    pub strategy: String,
    pub template: String,
    pub variant: String,
    pub language: String,
    pub n: usize,
    pub evaluated: usize,
    pub correct: usize,
    pub failed: usize,
    pub accuracy: Option<f64>,
    pub english_accuracy: Option<f64>,
    /// `english_accuracy - accuracy`.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub dataset_id: String,
    pub sources: Vec<String>,
    pub rows: Vec<MergedRow>,
}

/// `instruction/ids/shots/demos`, e.g. `aware0/ABCD/5/samebias`.
pub fn template_label(t: &PromptTemplate) -> String {
    format!("{}/{}/{}/{}", t.instruction, t.option_ids, t.shots, t.demo_strategy)
}

fn language_rank(l: &str) -> (usize, &str) {
    match l {
        "en" => (0, l),
        "fr" => (1, l),
        "de" => (2, l),
        "es" => (3, l),
        "it" => (4, l),
        "mixed" => (6, l),
        STAR => (7, l),
        _ => (5, l),
    }
}

/// Merges the summary rows of `reports`. English accuracy comes from the
/// `original` variant's `en` row under the same model, strategy and template
/// when one is present, else from the row's own variant.
pub fn merge_reports(reports: &[(String, EvalReport)]) -> Result<MergedReport, EvalError> {
    let Some((_, first)) = reports.first() else {
        return Err(EvalError::Config("report needs at least one input".into()));
    };
    let dataset_id = first.manifest.dataset_id.clone();
    for (path, r) in reports {
        if r.manifest.task != "mcq" {
            return Err(EvalError::Config(format!("{path}: only mcq reports can be merged")));
        }
        if r.manifest.dataset_id != dataset_id {
            return Err(EvalError::Config(format!(
                "{path}: dataset id {} differs from {dataset_id}",
                r.manifest.dataset_id
            )));
        }
    }

    type Key = (String, String, String, String, String);
    let mut rows: BTreeMap<Key, MergedRow> = BTreeMap::new();
    for (path, r) in reports {
        let m = &r.manifest;
        let template = template_label(&m.options.template);
        for s in &r.summary {
            let key = (m.model.clone(), m.options.strategy.to_string(), template.clone(), s.variant.clone(), s.language.clone());
            if rows.contains_key(&key) {
                return Err(EvalError::Config(format!(
                    "{path}: duplicate row for model {}, strategy {}, template {}, variant {}, language {}",
                    key.0, key.1, key.2, key.3, key.4
                )));
            }
            rows.insert(
                key,
                MergedRow {
                    model: m.model.clone(),
                    strategy: m.options.strategy.to_string(),
                    template: template.clone(),
                    variant: s.variant.clone(),
                    language: s.language.clone(),
                    n: s.tally.n,
                    evaluated: s.tally.evaluated,
                    correct: s.tally.correct,
                    failed: s.tally.failed,
                    accuracy: s.accuracy,
                    english_accuracy: None,
                    delta: None,
                },
            );
        }
    }

    let english = |model: &str, strategy: &str, template: &str, variant: &str| {
        let k = |v: &str| (model.to_string(), strategy.to_string(), template.to_string(), v.to_string(), "en".to_string());
        rows.get(&k(BASELINE_VARIANT))
            .or_else(|| rows.get(&k(variant)))
            .and_then(|r| r.accuracy)
    };
    let mut out: Vec<MergedRow> = rows
        .values()
        .map(|r| {
            let mut r = r.clone();
            r.english_accuracy = english(&r.model, &r.strategy, &r.template, &r.variant);
            r.delta = match (r.english_accuracy, r.accuracy) {
                (Some(e), Some(a)) => Some(e - a),
                _ => None,
            };
            r
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.model, &a.strategy, &a.template, &a.variant, language_rank(&a.language))
            .cmp(&(&b.model, &b.strategy, &b.template, &b.variant, language_rank(&b.language)))
    });
    Ok(MergedReport {
        dataset_id,
        sources: reports.iter().map(|(p, _)| p.clone()).collect(),
        rows: out,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl MergedReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model", "strategy", "template", "variant", "language", "n", "evaluated", "correct", "failed",
            "accuracy", "english_accuracy", "delta",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.strategy.clone(),
                r.template.clone(),
                r.variant.clone(),
                r.language.clone(),
                r.n.to_string(),
                r.evaluated.to_string(),
                r.correct.to_string(),
                r.failed.to_string(),
                fmt_opt(r.accuracy),
                fmt_opt(r.english_accuracy),
                fmt_opt(r.delta),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn models(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.model.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Accuracy bars for one model: languages on the x axis, one series per
    /// variant, strategy and template.
    pub fn model_svg(&self, model: &str) -> String {
        let rows: Vec<&MergedRow> = self.rows.iter().filter(|r| r.model == model).collect();
        let mut langs: Vec<&str> = rows.iter().map(|r| r.language.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
        langs.sort_by_key(|l| language_rank(l));
        let mut series: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        for r in &rows {
            let name = format!("{} {} {}", r.variant, r.strategy, r.template);
            let slot = series.entry(name).or_insert_with(|| vec![None; langs.len()]);
            let i = langs.iter().position(|l| *l == r.language).expect("language collected above");
            slot[i] = r.accuracy;
        }
        let categories: Vec<String> = langs.iter().map(|l| l.to_string()).collect();
        let series: Vec<(String, Vec<Option<f64>>)> = series.into_iter().collect();
        crate::plot::grouped_bars(&format!("accuracy: {model}"), &categories, &series, 1.0)
    }

    /// SVG path for `model`: `<out stem>.<model slug>.svg`.
    pub fn svg_path(out: &Path, model: &str) -> PathBuf {
        let slug: String = model
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        out.with_extension(format!("{slug}.svg"))
    }

    /// Writes `out` (JSON), a `.csv` sibling and one SVG per model.
    pub fn write_all(&self, out: &Path) -> Result<Vec<PathBuf>, DataError> {
        super::write_pretty(out, self)?;
        let csv_path = out.with_extension("csv");
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| DataError::io(&csv_path, e))?;
        let mut written = vec![out.to_path_buf(), csv_path];
        for m in self.models() {
            let p = Self::svg_path(out, &m);
            std::fs::write(&p, self.model_svg(&m)).map_err(|e| DataError::io(&p, e))?;
            written.push(p);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{DomainCategory, LanguageTag, McqItem, McqLang};
    use crate::evalharness::{run_eval, DemoPool, EvalDataset, EvalOptions, Knowledge, MockModel, MockModelSpec, Strategy};
    use std::sync::Arc;

    fn report(variant: &str, strategy: Strategy) -> EvalReport {
        let items: Vec<McqItem> = (0..8)
            .map(|i| McqItem {
                id: format!("q{i}"),
                subject: "astronomy".into(),
                domain_category: DomainCategory::Stem,
                question: format!("Question {i}?"),
                options: [0, 1, 2, 3].map(|j| format!("opt {j} {i}")),
                answer: i % 4,
                lang: McqLang::uniform(LanguageTag::english()),
            })
            .collect();
        let model = MockModel::new(MockModelSpec::UniformRandom { seed: 3 }, Arc::new(Knowledge::from_mcq(&items)));
        let ds = EvalDataset::from_items(items, variant);
        let opts = EvalOptions {
            strategy,
            ..EvalOptions::default()
        };
        run_eval(&ds, &opts, &DemoPool::empty(), &model).unwrap()
    }

    #[test]
    fn single_report_matches_its_summary() {
        let r = report("original", Strategy::MaxProb);
        let m = merge_reports(&[("a".into(), r.clone())]).unwrap();
        assert_eq!(m.rows.len(), r.summary.len());
        for (row, s) in m.rows.iter().zip(&r.summary) {
            assert_eq!(row.accuracy, s.accuracy);
            assert_eq!(row.language, s.language);
        }
    }

    #[test]
    fn two_strategies_give_two_rows_and_consistent_deltas() {
        let a = report("original", Strategy::MaxProb);
        let b = report("original", Strategy::FirstToken);
        let m = merge_reports(&[("a".into(), a), ("b".into(), b)]).unwrap();
        let en: Vec<_> = m.rows.iter().filter(|r| r.language == "en").collect();
        assert_eq!(en.len(), 2);
        for r in &m.rows {
            if let (Some(e), Some(a)) = (r.english_accuracy, r.accuracy) {
                assert_eq!(r.delta, Some(e - a));
            }
        }
    }

    #[test]
    fn mixed_dataset_ids_are_rejected() {
        let a = report("original", Strategy::MaxProb);
        let mut b = a.clone();
        b.manifest.dataset_id = "other".into();
        assert!(merge_reports(&[("a".into(), a), ("b".into(), b)]).is_err());
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let a = report("original", Strategy::MaxProb);
        assert!(merge_reports(&[("a".into(), a.clone()), ("b".into(), a)]).is_err());
    }
}
