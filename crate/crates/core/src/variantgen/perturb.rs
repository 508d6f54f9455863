use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::VariantError;
use crate::datamodel::{LanguageSet, LanguageTag};
use crate::rng::RngSpec;
use crate::translate::{TranslationRequest, Translator};
use crate::unitsplit::WordPieces;

/// Replacement vocabulary: distinct tokens in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    position: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<I, S>(tokens: I) -> Result<Self, VariantError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Vec::new();
        let mut position = HashMap::new();
        for t in tokens {
            let t = t.into();
            if t.is_empty() || position.contains_key(&t) {
                continue;
            }
            position.insert(t.clone(), out.len());
            out.push(t);
        }
        if out.is_empty() {
            return Err(VariantError::EmptyVocab);
        }
        Ok(Self { tokens: out, position })
    }

    /// One token per line; blank lines ignored.
    pub fn load(path: &Path) -> Result<Self, VariantError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VariantError::Io(format!("{}: {e}", path.display())))?;
        Self::new(text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.trim().is_empty()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Uniform draw among tokens different from `original`.
    fn draw_different<R: Rng>(&self, original: &str, rng: &mut R) -> Option<&str> {
        match self.position.get(original) {
            Some(&skip) => {
                if self.tokens.len() < 2 {
                    return None;
                }
                let mut i = rng.random_range(0..self.tokens.len() - 1);
                if i >= skip {
                    i += 1;
                }
                Some(&self.tokens[i])
            }
            None => Some(&self.tokens[rng.random_range(0..self.tokens.len())]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbKind {
    /// Each word translated with probability `p` into a language drawn
    /// uniformly from the pool (the pivot meaning "left as is").
    WordTranslate { langs: LanguageSet },
    RandomTokenReplace { vocab: Vocab },
    TokenDropout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    pub p: f64,
}

impl PerturbSpec {
    pub fn new(kind: PerturbKind, p: f64) -> Result<Self, VariantError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(VariantError::InvalidKind(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { kind, p })
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            PerturbKind::WordTranslate { .. } => "word-translate",
            PerturbKind::RandomTokenReplace { .. } => "token-replace",
            PerturbKind::TokenDropout => "dropout",
        }
    }

    /// Parses `word-translate:P`, `token-replace:P` or `dropout:P`.
    pub fn parse(s: &str, langs: &LanguageSet, vocab: Option<&Vocab>) -> Result<Self, VariantError> {
        let (mode, p) = s
            .split_once(':')
            .ok_or_else(|| VariantError::InvalidKind(format!("perturbation {s:?} needs MODE:P")))?;
        let p: f64 = p
            .parse()
            .map_err(|_| VariantError::InvalidKind(format!("bad probability in {s:?}")))?;
        let kind = match mode {
            "word-translate" => PerturbKind::WordTranslate { langs: langs.clone() },
            "token-replace" => PerturbKind::RandomTokenReplace {
                vocab: vocab.cloned().ok_or(VariantError::EmptyVocab)?,
            },
            "dropout" => PerturbKind::TokenDropout,
            other => return Err(VariantError::InvalidKind(format!("unknown perturbation {other:?}"))),
        };
        PerturbSpec::new(kind, p)
    }
}

impl fmt::Display for PerturbSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.label(), self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbedText {
    pub text: String,
    /// One flag per word (dropout only); `true` means masked out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout_mask: Option<Vec<bool>>,
    pub words: usize,
    /// Words whose surface text changed (translated to a non-pivot language,
    /// replaced, or masked).
    pub changed: usize,
}

/// Applies one perturbation with the stream keyed by `(kind, doc_id)`.
pub fn perturb(
    doc_id: &str,
    text: &str,
    spec: &PerturbSpec,
    rng: &RngSpec,
    translator: &Translator,
) -> Result<PerturbedText, VariantError> {
    let mut stream = rng.stream(&["perturb", spec.label(), doc_id]);
    let pieces = WordPieces::new(text);
    let words: Vec<&str> = pieces.words().collect();
    match &spec.kind {
        PerturbKind::WordTranslate { langs } => {
            let mut replace: HashMap<usize, LanguageTag> = HashMap::new();
            for i in 0..words.len() {
                if stream.random_bool(spec.p) {
                    let l = &langs.members()[stream.random_range(0..langs.len())];
                    if l != langs.pivot() {
                        replace.insert(i, l.clone());
                    }
                }
            }
            let order: BTreeSet<usize> = replace.keys().copied().collect();
            let reqs: Vec<TranslationRequest> = order
                .iter()
                .map(|&i| TranslationRequest {
                    text: words[i].to_string(),
                    source: langs.pivot().clone(),
                    target: replace[&i].clone(),
                })
                .collect();
            let translated = translator.translate_batch(&reqs).map_err(|e| {
                let (j, first) = e.failures[0].clone();
                VariantError::Translation {
                    item_id: doc_id.to_string(),
                    field: format!("word[{}]", order.iter().nth(j).copied().unwrap_or(0)),
                    source: first,
                }
            })?;
            let by_word: HashMap<usize, String> = order.iter().copied().zip(translated).collect();
            let out = pieces.rebuild(|i, w| by_word.get(&i).cloned().unwrap_or_else(|| w.to_string()));
            Ok(PerturbedText {
                text: out,
                dropout_mask: None,
                words: words.len(),
                changed: by_word.len(),
            })
        }
        PerturbKind::RandomTokenReplace { vocab } => {
            let mut changed = 0;
            let mut failure = None;
            let out = pieces.rebuild(|_, w| {
                if stream.random_bool(spec.p) {
                    match vocab.draw_different(w, &mut stream) {
                        Some(t) => {
                            changed += 1;
                            return t.to_string();
                        }
                        None => failure = Some(w.to_string()),
                    }
                }
                w.to_string()
            });
            if let Some(w) = failure {
                return Err(VariantError::NoReplacement(w));
            }
            Ok(PerturbedText {
                text: out,
                dropout_mask: None,
                words: words.len(),
                changed,
            })
        }
        PerturbKind::TokenDropout => {
            let mask: Vec<bool> = (0..words.len()).map(|_| stream.random_bool(spec.p)).collect();
            let changed = mask.iter().filter(|m| **m).count();
            Ok(PerturbedText {
                text: text.to_string(),
                dropout_mask: (spec.p > 0.0).then_some(mask),
                words: words.len(),
                changed,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TEXT: &str = "The quick brown fox jumps over the lazy dog, twice.";

    #[test]
    fn zero_probability_is_identity() {
        let pool = LanguageSet::default_pool();
        let vocab = Vocab::new(["a", "b"]).unwrap();
        let tr = Translator::mock();
        for spec in [
            PerturbSpec::new(PerturbKind::WordTranslate { langs: pool.clone() }, 0.0).unwrap(),
            PerturbSpec::new(PerturbKind::RandomTokenReplace { vocab }, 0.0).unwrap(),
            PerturbSpec::new(PerturbKind::TokenDropout, 0.0).unwrap(),
        ] {
            let out = perturb("d", TEXT, &spec, &RngSpec::new(1), &tr).unwrap();
            assert_eq!(out.text, TEXT);
            assert_eq!(out.changed, 0);
            assert!(out.dropout_mask.is_none());
        }
    }

    #[test]
    fn word_translate_tags_whole_words() {
        let spec = PerturbSpec::new(PerturbKind::WordTranslate { langs: LanguageSet::default_pool() }, 1.0).unwrap();
        let out = perturb("d", "red apple", &spec, &RngSpec::new(3), &Translator::mock()).unwrap();
        assert_eq!(crate::translate::strip_mock_tags(&out.text), "red apple");
        assert_eq!(out.words, 2);
        assert_eq!(out.changed, out.text.matches('⟦').count());
    }

    #[test]
    fn dropout_emits_mask_and_keeps_text() {
        let spec = PerturbSpec::new(PerturbKind::TokenDropout, 0.5).unwrap();
        let out = perturb("d", TEXT, &spec, &RngSpec::new(8), &Translator::mock()).unwrap();
        assert_eq!(out.text, TEXT);
        let mask = out.dropout_mask.unwrap();
        assert_eq!(mask.len(), 10);
        assert_eq!(mask.iter().filter(|m| **m).count(), out.changed);
    }

    #[test]
    fn vocab_rules() {
        assert!(matches!(Vocab::new(Vec::<String>::new()), Err(VariantError::EmptyVocab)));
        let v = Vocab::new(["x", "x", "", "y"]).unwrap();
        assert_eq!(v.len(), 2);
        let single = Vocab::new(["dog"]).unwrap();
        let spec = PerturbSpec::new(PerturbKind::RandomTokenReplace { vocab: single }, 1.0).unwrap();
        let err = perturb("d", "dog", &spec, &RngSpec::new(1), &Translator::mock()).unwrap_err();
        assert!(matches!(err, VariantError::NoReplacement(_)));
    }

    #[test]
    fn parse_modes() {
        let pool = LanguageSet::default_pool();
        let v = Vocab::new(["a"]).unwrap();
        assert_eq!(PerturbSpec::parse("dropout:0.16", &pool, None).unwrap().to_string(), "dropout:0.16");
        assert!(PerturbSpec::parse("token-replace:0.16", &pool, None).is_err());
        assert!(PerturbSpec::parse("token-replace:0.16", &pool, Some(&v)).is_ok());
        assert!(PerturbSpec::parse("word-translate:1.5", &pool, None).is_err());
        assert!(PerturbSpec::parse("shuffle:0.1", &pool, None).is_err());
    }

    proptest! {
        #[test]
        fn replaced_tokens_always_differ(
            vocab in prop::collection::vec("[a-c]{1,2}", 2..8),
            words in prop::collection::vec("[a-c]{1,2}", 1..30),
            seed in any::<u64>(),
        ) {
            prop_assume!(Vocab::new(vocab.clone()).map(|v| v.len() >= 2).unwrap_or(false));
            let text = words.join(" ");
            let spec = PerturbSpec::new(
                PerturbKind::RandomTokenReplace { vocab: Vocab::new(vocab).unwrap() },
                0.5,
            ).unwrap();
            let out = perturb("doc", &text, &spec, &RngSpec::new(seed), &Translator::mock()).unwrap();
            let after: Vec<&str> = out.text.split(' ').collect();
            prop_assert_eq!(after.len(), words.len());
            let differing = words.iter().zip(&after).filter(|(a, b)| a.as_str() != **b).count();
            prop_assert_eq!(differing, out.changed);
        }
    }
}
