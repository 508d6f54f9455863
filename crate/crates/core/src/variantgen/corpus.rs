use rand::Rng;
use serde::{Deserialize, Serialize};

use super::VariantError;
use crate::datamodel::{CorpusDoc, LanguageSet, LanguageTag};
use crate::rng::RngSpec;
use crate::translate::TranslationRequest;
use crate::translate::Translator;
use crate::unitsplit::{self, Granularity};

/// Draws one language per unit, uniformly over the whole pool (pivot included).
pub fn assign_unit_languages(
    doc_id: &str,
    n_units: usize,
    langs: &LanguageSet,
    rng: &RngSpec,
) -> Vec<LanguageTag> {
    let mut stream = rng.stream(&["mix-corpus", doc_id]);
    (0..n_units)
        .map(|_| langs.members()[stream.random_range(0..langs.len())].clone())
        .collect()
}

/// Mixed-language rewrite of one document: each unit is independently kept
/// (pivot) or translated, then reassembled with the original separators.
pub fn mix_document(
    doc: &CorpusDoc,
    granularity: Granularity,
    langs: &LanguageSet,
    rng: &RngSpec,
    translator: &Translator,
) -> Result<CorpusDoc, VariantError> {
    let seq = unitsplit::split(&doc.text, granularity);
    let assigned = assign_unit_languages(&doc.id, seq.len(), langs, rng);
    let reqs: Vec<TranslationRequest> = seq
        .units
        .iter()
        .zip(&assigned)
        .map(|(u, l)| TranslationRequest {
            text: u.text.clone(),
            source: langs.pivot().clone(),
            target: l.clone(),
        })
        .collect();
    let texts = translator.translate_batch(&reqs).map_err(|e| {
        let (idx, first) = e.failures[0].clone();
        VariantError::Translation {
            item_id: doc.id.clone(),
            field: format!("unit[{idx}]"),
            source: first,
        }
    })?;
    let mixed = seq.with_texts(texts).expect("one text per unit");
    Ok(CorpusDoc {
        id: doc.id.clone(),
        text: unitsplit::reassemble(&mixed).expect("structure preserved"),
        meta: doc.meta.clone(),
    })
}

/// Training recipe recorded next to mixed corpora. Nothing here runs training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneManifest {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub optimizer: String,
}

impl FineTuneManifest {
    pub const LEARNING_RATE: f64 = 2e-5;
    pub const BATCH_SIZE: usize = 32;

    /// One epoch over `n_docs` unless `steps` is given.
    pub fn for_corpus(n_docs: usize, steps: Option<usize>) -> Self {
        Self {
            lr: Self::LEARNING_RATE,
            batch_size: Self::BATCH_SIZE,
            steps: steps.unwrap_or_else(|| n_docs.div_ceil(Self::BATCH_SIZE)),
            optimizer: "adamw".to_string(),
        }
    }
}
