//! Seeded generation of crosslingual MCQ variants, mixed-language corpora and
//! embedding-probe perturbations.
//!
//! All randomness comes from [`RngSpec`] streams keyed by item id, so outputs
//! do not depend on worker count or processing order.

mod corpus;
mod mcq;
mod perturb;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use corpus::{assign_unit_languages, mix_document, FineTuneManifest};
pub use mcq::{gen_mcq_variant, plan_assignment, MixupMode, Target, VariantKind};
pub use perturb::{perturb, PerturbKind, PerturbSpec, PerturbedText, Vocab};

use crate::datamodel::{
    read_jsonl, write_jsonl, CorpusDoc, DataError, DatasetManifest, LanguageSet, McqItem,
};
use crate::rng::RngSpec;
use crate::translate::{TranslateError, Translator};
use crate::unitsplit::Granularity;

#[derive(Debug, thiserror::Error)]
pub enum VariantError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("item {item_id}, field {field}: {source}")]
    Translation {
        item_id: String,
        field: String,
        #[source]
        source: TranslateError,
    },
    #[error("aborted after {completed} of {total} items: {first}")]
    Aborted {
        completed: usize,
        total: usize,
        first: Box<VariantError>,
    },
    #[error("{0}")]
    InvalidKind(String),
    #[error("replacement vocabulary is empty")]
    EmptyVocab,
    #[error("vocabulary has no token different from {0:?}")]
    NoReplacement(String),
    #[error("{0}")]
    Io(String),
    #[error("cannot replay manifest: {0}")]
    Replay(String),
}

impl VariantError {
    /// Whether the root cause is a translation backend failure.
    pub fn is_backend_failure(&self) -> bool {
        match self {
            VariantError::Translation { source, .. } => source.is_backend_failure(),
            VariantError::Aborted { first, .. } => first.is_backend_failure(),
            _ => false,
        }
    }
}

/// Collects per-item results in input order; aborts with a progress count
/// on the first failure.
fn collect_ordered<T>(results: Vec<Result<T, VariantError>>) -> Result<Vec<T>, VariantError> {
    let total = results.len();
    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut out = Vec::with_capacity(total);
    let mut first = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) if first.is_none() => first = Some(e),
            Err(_) => {}
        }
    }
    match first {
        None => Ok(out),
        Some(e) => Err(VariantError::Aborted {
            completed,
            total,
            first: Box::new(e),
        }),
    }
}

/// Writes one variant per input item, in input order, plus the manifest.
pub fn gen_variant_dataset(
    in_path: &Path,
    kind: &VariantKind,
    langs: &LanguageSet,
    rng: &RngSpec,
    translator: &Translator,
    out_path: &Path,
) -> Result<DatasetManifest, VariantError> {
    let items: Vec<McqItem> = read_jsonl(in_path)?;
    let results: Vec<_> = items
        .par_iter()
        .map(|item| gen_mcq_variant(item, kind, langs, rng, translator))
        .collect();
    let variants = collect_ordered(results)?;
    write_jsonl(out_path, &variants)?;

    let mut manifest = DatasetManifest::for_source("gen-variants", in_path)?;
    manifest.variant = Some(kind.to_string());
    manifest.language_set = Some(langs.clone());
    manifest.seed = Some(rng.seed);
    manifest.backend_id = Some(translator.backend_id().to_string());
    if matches!(kind, VariantKind::Mixup) {
        manifest
            .details
            .insert("mixup_mode".into(), MixupMode::for_pool(langs).as_str().into());
    }
    manifest.finish(out_path, variants.len())?;
    Ok(manifest)
}

/// Path of the training-recipe sidecar written next to a mixed corpus.
pub fn finetune_sidecar(out_path: &Path) -> std::path::PathBuf {
    let mut os = out_path.as_os_str().to_owned();
    os.push(".finetune.json");
    os.into()
}

pub fn mix_corpus(
    in_path: &Path,
    granularity: Granularity,
    langs: &LanguageSet,
    rng: &RngSpec,
    translator: &Translator,
    out_path: &Path,
    finetune_steps: Option<usize>,
) -> Result<DatasetManifest, VariantError> {
    let docs: Vec<CorpusDoc> = read_jsonl(in_path)?;
    let results: Vec<_> = docs
        .par_iter()
        .map(|d| mix_document(d, granularity, langs, rng, translator))
        .collect();
    let mixed = collect_ordered(results)?;
    write_jsonl(out_path, &mixed)?;

    let recipe = FineTuneManifest::for_corpus(mixed.len(), finetune_steps);
    let recipe_path = finetune_sidecar(out_path);
    let mut text = serde_json::to_string_pretty(&recipe).expect("recipe serializes");
    text.push('\n');
    std::fs::write(&recipe_path, text).map_err(|e| DataError::io(&recipe_path, e))?;

    let mut manifest = DatasetManifest::for_source("mix-corpus", in_path)?;
    manifest.language_set = Some(langs.clone());
    manifest.seed = Some(rng.seed);
    manifest.granularity = Some(granularity.to_string());
    manifest.backend_id = Some(translator.backend_id().to_string());
    if let Some(steps) = finetune_steps {
        manifest.details.insert("finetune_steps".into(), steps.into());
    }
    manifest.finish(out_path, mixed.len())?;
    Ok(manifest)
}

/// One perturbed corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbedDoc {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout_mask: Option<Vec<bool>>,
}

pub fn perturb_corpus(
    in_path: &Path,
    spec: &PerturbSpec,
    rng: &RngSpec,
    translator: &Translator,
    out_path: &Path,
    vocab_path: Option<&Path>,
) -> Result<DatasetManifest, VariantError> {
    let docs: Vec<CorpusDoc> = read_jsonl(in_path)?;
    let results: Vec<_> = docs
        .par_iter()
        .map(|d| {
            perturb(&d.id, &d.text, spec, rng, translator).map(|p| PerturbedDoc {
                id: d.id.clone(),
                text: p.text,
                dropout_mask: p.dropout_mask,
            })
        })
        .collect();
    let out = collect_ordered(results)?;
    write_jsonl(out_path, &out)?;

    let mut manifest = DatasetManifest::for_source("perturb", in_path)?;
    manifest.seed = Some(rng.seed);
    manifest.backend_id = Some(translator.backend_id().to_string());
    manifest.details.insert("mode".into(), spec.to_string().into());
    match &spec.kind {
        PerturbKind::WordTranslate { langs } => manifest.language_set = Some(langs.clone()),
        PerturbKind::RandomTokenReplace { .. } => {
            if let Some(p) = vocab_path {
                manifest
                    .details
                    .insert("vocab_path".into(), p.display().to_string().into());
            }
        }
        PerturbKind::TokenDropout => {}
    }
    manifest.finish(out_path, out.len())?;
    Ok(manifest)
}

/// Regenerates the output a manifest describes, writing it to `out_path`.
/// The source file must still hash to the recorded digest.
pub fn replay(
    manifest: &DatasetManifest,
    translator: &Translator,
    out_path: &Path,
) -> Result<DatasetManifest, VariantError> {
    let source = Path::new(&manifest.source_path);
    let bytes = std::fs::read(source).map_err(|e| DataError::io(source, e))?;
    if crate::datamodel::sha256_hex(&bytes) != manifest.source_sha256 {
        return Err(VariantError::Replay(format!(
            "source {} changed since the manifest was written",
            manifest.source_path
        )));
    }
    let missing = |what: &str| VariantError::Replay(format!("manifest lacks {what}"));
    let rng = RngSpec::new(manifest.seed.ok_or_else(|| missing("seed"))?);
    match manifest.operation.as_str() {
        "gen-variants" => {
            let kind: VariantKind = manifest
                .variant
                .as_deref()
                .ok_or_else(|| missing("variant"))?
                .parse()?;
            let langs = manifest.language_set.clone().ok_or_else(|| missing("language_set"))?;
            gen_variant_dataset(source, &kind, &langs, &rng, translator, out_path)
        }
        "mix-corpus" => {
            let g: Granularity = manifest
                .granularity
                .as_deref()
                .ok_or_else(|| missing("granularity"))?
                .parse()
                .map_err(|e| VariantError::Replay(format!("{e}")))?;
            let langs = manifest.language_set.clone().ok_or_else(|| missing("language_set"))?;
            let steps = manifest
                .details
                .get("finetune_steps")
                .and_then(|v| v.as_u64())
                .map(|s| s as usize);
            mix_corpus(source, g, &langs, &rng, translator, out_path, steps)
        }
        "perturb" => {
            let mode = manifest
                .details
                .get("mode")
                .and_then(|v| v.as_str())
                .ok_or_else(|| missing("mode"))?;
            let vocab_path = manifest.details.get("vocab_path").and_then(|v| v.as_str()).map(Path::new);
            let vocab = vocab_path.map(Vocab::load).transpose()?;
            let langs = manifest
                .language_set
                .clone()
                .unwrap_or_else(LanguageSet::default_pool);
            let spec = PerturbSpec::parse(mode, &langs, vocab.as_ref())?;
            perturb_corpus(source, &spec, &rng, translator, out_path, vocab_path)
        }
        other => Err(VariantError::Replay(format!("operation {other:?} is not replayable"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{to_jsonl_string, DomainCategory, LanguageTag, McqLang};

    fn fixture(n: usize) -> Vec<McqItem> {
        (0..n)
            .map(|i| McqItem {
                id: format!("item-{i}"),
                subject: ["anatomy", "virology"][i % 2].to_string(),
                domain_category: DomainCategory::Others,
                question: format!("Question number {i}?"),
                options: [0, 1, 2, 3].map(|j| format!("option {j} of {i}")),
                answer: (i * 7) % 4,
                lang: McqLang::uniform(LanguageTag::english()),
            })
            .collect()
    }

    #[test]
    fn dataset_size_order_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.jsonl");
        std::fs::write(&src, to_jsonl_string(&fixture(30))).unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let pool = LanguageSet::default_pool();
        let m = gen_variant_dataset(&src, &VariantKind::Mixup, &pool, &RngSpec::new(5), &Translator::mock(), &a)
            .unwrap();
        gen_variant_dataset(&src, &VariantKind::Mixup, &pool, &RngSpec::new(5), &Translator::mock(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(m.item_count, 30);
        assert_eq!(m.details["mixup_mode"], "permutation");
        let out: Vec<McqItem> = read_jsonl(&a).unwrap();
        let ids: Vec<_> = out.iter().map(|i| i.id.clone()).collect();
        assert_eq!(ids, fixture(30).into_iter().map(|i| i.id).collect::<Vec<_>>());
    }

    #[test]
    fn empty_dataset_still_gets_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("empty.jsonl");
        std::fs::write(&src, "").unwrap();
        let out = dir.path().join("out.jsonl");
        let m = gen_variant_dataset(&src, &VariantKind::GtOption(Target::Random), &LanguageSet::default_pool(), &RngSpec::new(1), &Translator::mock(), &out)
            .unwrap();
        assert_eq!(m.item_count, 0);
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
        assert!(DatasetManifest::sidecar_path(&out).exists());
    }

    #[test]
    fn backend_failure_aborts_with_progress() {
        use crate::translate::{BackendSpec, TranslationCache};
        use std::sync::Arc;
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.jsonl");
        std::fs::write(&src, to_jsonl_string(&fixture(4))).unwrap();
        let tr = Translator::from_spec(&BackendSpec::cache_only("mock"), Arc::new(TranslationCache::in_memory())).unwrap();
        let err = gen_variant_dataset(
            &src,
            &VariantKind::Full(Target::Lang(LanguageTag::parse("fr").unwrap())),
            &LanguageSet::default_pool(),
            &RngSpec::new(1),
            &tr,
            &dir.path().join("o.jsonl"),
        )
        .unwrap_err();
        assert!(err.is_backend_failure());
        match err {
            VariantError::Aborted { completed, total, first } => {
                assert_eq!((completed, total), (0, 4));
                assert!(first.to_string().contains("item-0"), "{first}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn replay_reproduces_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("corpus.jsonl");
        let docs: Vec<CorpusDoc> = (0..12)
            .map(|i| CorpusDoc::new(format!("d{i}"), format!("Sentence {i} here. And another one, friend! End")))
            .collect();
        std::fs::write(&src, to_jsonl_string(&docs)).unwrap();
        let first = dir.path().join("mixed.jsonl");
        let m = mix_corpus(&src, Granularity::Chunk(2), &LanguageSet::default_pool(), &RngSpec::new(21), &Translator::mock(), &first, None)
            .unwrap();
        let again = dir.path().join("again.jsonl");
        let m2 = replay(&m, &Translator::mock(), &again).unwrap();
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&again).unwrap());
        assert_eq!(m.output_sha256, m2.output_sha256);
        let recipe: FineTuneManifest =
            serde_json::from_str(&std::fs::read_to_string(finetune_sidecar(&first)).unwrap()).unwrap();
        assert_eq!(recipe.steps, 1);
    }

    #[test]
    fn replay_rejects_changed_source() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.jsonl");
        std::fs::write(&src, to_jsonl_string(&fixture(2))).unwrap();
        let out = dir.path().join("o.jsonl");
        let m = gen_variant_dataset(&src, &VariantKind::GtOption(Target::Random), &LanguageSet::default_pool(), &RngSpec::new(1), &Translator::mock(), &out)
            .unwrap();
        std::fs::write(&src, to_jsonl_string(&fixture(3))).unwrap();
        assert!(matches!(replay(&m, &Translator::mock(), &out), Err(VariantError::Replay(_))));
    }
}
