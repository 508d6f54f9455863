//! Lossless decomposition of documents into translation units.
//!
//! Sentences are delimited by matches of `\s*[\.,;!?]\s+`; words are maximal
//! runs of word characters, i.e. the complement of `\W+`. Both classes are
//! Unicode aware. Every split keeps the separators verbatim so that
//! [`reassemble`] restores the source byte for byte.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Sentence separator pattern.
pub const SENTENCE_SEPARATOR: &str = r"\s*[\.,;!?]\s+";
/// Word separator pattern.
pub const WORD_SEPARATOR: &str = r"\W+";

fn sentence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(SENTENCE_SEPARATOR).expect("valid regex"))
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+").expect("valid regex"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Document,
    Sentence,
    /// `k`-word chunks inside each sentence; `k >= 1`.
    Chunk(usize),
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Document => f.write_str("document"),
            Granularity::Sentence => f.write_str("sentence"),
            Granularity::Chunk(k) => write!(f, "chunk:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnitError {
    #[error("invalid granularity {0:?}; expected document, sentence or chunk:K with K >= 1")]
    BadGranularity(String),
    #[error("unit/separator length mismatch: {units} units, {separators} separators")]
    LengthMismatch { units: usize, separators: usize },
}

impl FromStr for Granularity {
    type Err = UnitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "document" => Ok(Granularity::Document),
            "sentence" => Ok(Granularity::Sentence),
            _ => {
                let k = s
                    .strip_prefix("chunk:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| UnitError::BadGranularity(s.to_string()))?;
                Ok(Granularity::Chunk(k))
            }
        }
    }
}

impl Serialize for Granularity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Granularity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub text: String,
    pub index: usize,
}

/// Units interleaved with the separators that follow them:
/// `unit[0] sep[0] unit[1] sep[1] ...`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UnitSequence {
    pub units: Vec<Unit>,
    pub separators: Vec<String>,
}

impl UnitSequence {
    fn push(&mut self, text: String, separator: String) {
        let index = self.units.len();
        self.units.push(Unit { text, index });
        self.separators.push(separator);
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Replaces every unit text, keeping separators and indices.
    pub fn with_texts(&self, texts: Vec<String>) -> Result<UnitSequence, UnitError> {
        if texts.len() != self.units.len() {
            return Err(UnitError::LengthMismatch {
                units: texts.len(),
                separators: self.separators.len(),
            });
        }
        Ok(UnitSequence {
            units: texts
                .into_iter()
                .enumerate()
                .map(|(index, text)| Unit { text, index })
                .collect(),
            separators: self.separators.clone(),
        })
    }
}

/// Splits `text` at the requested granularity. Total: every input yields a
/// sequence that reassembles to itself.
pub fn split(text: &str, granularity: Granularity) -> UnitSequence {
    if text.is_empty() {
        return UnitSequence::default();
    }
    match granularity {
        Granularity::Document => {
            let mut seq = UnitSequence::default();
            seq.push(text.to_string(), String::new());
            seq
        }
        Granularity::Sentence => split_sentences(text),
        Granularity::Chunk(k) => {
            assert!(k >= 1, "chunk size must be at least 1");
            let sentences = split_sentences(text);
            let mut seq = UnitSequence::default();
            for (unit, sep) in sentences.units.iter().zip(&sentences.separators) {
                chunk_sentence(&unit.text, sep, k, &mut seq);
            }
            seq
        }
    }
}

/// Sentence spans. Adjacent separator matches are merged into one separator,
/// and a separator at the very start is carried into the first unit, so no
/// unit is ever empty.
fn split_sentences(text: &str) -> UnitSequence {
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for m in sentence_re().find_iter(text) {
        match merged.last_mut() {
            Some(last) if last.1 == m.start() => last.1 = m.end(),
            _ => merged.push((m.start(), m.end())),
        }
    }

    let mut seq = UnitSequence::default();
    let mut carry = String::new();
    let mut pos = 0;
    for (start, end) in merged {
        if start == 0 {
            carry.push_str(&text[..end]);
        } else {
            let mut unit = std::mem::take(&mut carry);
            unit.push_str(&text[pos..start]);
            seq.push(unit, text[start..end].to_string());
        }
        pos = end;
    }
    if pos < text.len() || !carry.is_empty() {
        carry.push_str(&text[pos..]);
        seq.push(carry, String::new());
    }
    seq
}

/// Splits one sentence into runs of `k` words. Leading non-word text joins the
/// first chunk and trailing non-word text joins the last one.
fn chunk_sentence(sentence: &str, sentence_sep: &str, k: usize, out: &mut UnitSequence) {
    let words: Vec<(usize, usize)> = word_spans(sentence);
    if words.is_empty() {
        out.push(sentence.to_string(), sentence_sep.to_string());
        return;
    }
    let n_chunks = words.len().div_ceil(k);
    for j in 0..n_chunks {
        let first = j * k;
        let last = (first + k).min(words.len()) - 1;
        let start = if j == 0 { 0 } else { words[first].0 };
        if j + 1 == n_chunks {
            out.push(sentence[start..].to_string(), sentence_sep.to_string());
        } else {
            let end = words[last].1;
            let next = words[last + 1].0;
            out.push(sentence[start..end].to_string(), sentence[end..next].to_string());
        }
    }
}

/// Exact inverse of [`split`].
pub fn reassemble(seq: &UnitSequence) -> Result<String, UnitError> {
    if seq.units.len() != seq.separators.len() {
        return Err(UnitError::LengthMismatch {
            units: seq.units.len(),
            separators: seq.separators.len(),
        });
    }
    let cap = seq.units.iter().map(|u| u.text.len()).sum::<usize>()
        + seq.separators.iter().map(String::len).sum::<usize>();
    let mut out = String::with_capacity(cap);
    for (unit, sep) in seq.units.iter().zip(&seq.separators) {
        out.push_str(&unit.text);
        out.push_str(sep);
    }
    Ok(out)
}

/// Byte spans of the words in `text`.
pub fn word_spans(text: &str) -> Vec<(usize, usize)> {
    word_re()
        .find_iter(text)
        .map(|m| (m.start(), m.end()))
        .collect()
}

pub fn words(text: &str) -> Vec<&str> {
    word_re().find_iter(text).map(|m| m.as_str()).collect()
}

pub fn word_count(text: &str) -> usize {
    word_re().find_iter(text).count()
}

/// A text cut into alternating word / non-word pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPieces<'a> {
    pieces: Vec<(bool, &'a str)>,
}

impl<'a> WordPieces<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut pieces = Vec::new();
        let mut pos = 0;
        for (s, e) in word_spans(text) {
            if s > pos {
                pieces.push((false, &text[pos..s]));
            }
            pieces.push((true, &text[s..e]));
            pos = e;
        }
        if pos < text.len() {
            pieces.push((false, &text[pos..]));
        }
        Self { pieces }
    }

    pub fn word_count(&self) -> usize {
        self.pieces.iter().filter(|(w, _)| *w).count()
    }

    /// Rebuilds the text, replacing the i-th word with `f(i, word)`.
    pub fn rebuild<F>(&self, mut f: F) -> String
    where
        F: FnMut(usize, &str) -> String,
    {
        let mut out = String::new();
        let mut wi = 0;
        for (is_word, piece) in &self.pieces {
            if *is_word {
                out.push_str(&f(wi, piece));
                wi += 1;
            } else {
                out.push_str(piece);
            }
        }
        out
    }

    pub fn words(&self) -> impl Iterator<Item = &'a str> + '_ {
        self.pieces.iter().filter(|(w, _)| *w).map(|(_, p)| *p)
    }
}

/// One unit of a split corpus, addressable back to its document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    /// Separator that follows the unit in the source document.
    pub separator: String,
}

/// Splits every document of a corpus file into unit records, in document
/// then unit order, and writes them with a manifest.
pub fn split_corpus(
    in_path: &std::path::Path,
    granularity: Granularity,
    out_path: &std::path::Path,
) -> Result<crate::datamodel::DatasetManifest, crate::datamodel::DataError> {
    use crate::datamodel::{read_jsonl, write_jsonl, CorpusDoc, DatasetManifest};
    let docs: Vec<CorpusDoc> = read_jsonl(in_path)?;
    let records: Vec<UnitRecord> = docs
        .iter()
        .flat_map(|d| {
            let seq = split(&d.text, granularity);
            seq.units
                .into_iter()
                .zip(seq.separators)
                .map(|(u, sep)| UnitRecord {
                    doc_id: d.id.clone(),
                    index: u.index,
                    text: u.text,
                    separator: sep,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    write_jsonl(out_path, &records)?;
    let mut manifest = DatasetManifest::for_source("split", in_path)?;
    manifest.granularity = Some(granularity.to_string());
    manifest.details.insert("documents".into(), docs.len().into());
    manifest.finish(out_path, records.len())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(seq: &UnitSequence) -> Vec<&str> {
        seq.units.iter().map(|u| u.text.as_str()).collect()
    }

    #[test]
    fn sentence_example() {
        let seq = split("Hello world. How are you?", Granularity::Sentence);
        assert_eq!(texts(&seq), ["Hello world", "How are you?"]);
        assert_eq!(seq.separators, [". ", ""]);
    }

    #[test]
    fn document_is_identity() {
        let seq = split("abc", Granularity::Document);
        assert_eq!(texts(&seq), ["abc"]);
        assert_eq!(seq.separators, [""]);
    }

    #[test]
    fn chunk_example() {
        let seq = split("a b c d e", Granularity::Chunk(3));
        assert_eq!(texts(&seq), ["a b c", "d e"]);
        assert_eq!(seq.separators, [" ", ""]);
    }

    #[test]
    fn reassemble_direct() {
        let seq = UnitSequence {
            units: vec![Unit { text: "x".into(), index: 0 }],
            separators: vec!["!".into()],
        };
        assert_eq!(reassemble(&seq).unwrap(), "x!");
    }

    #[test]
    fn reassemble_length_mismatch() {
        let seq = UnitSequence {
            units: vec![Unit { text: "x".into(), index: 0 }],
            separators: vec![],
        };
        assert_eq!(
            reassemble(&seq),
            Err(UnitError::LengthMismatch { units: 1, separators: 0 })
        );
    }

    #[test]
    fn empty_input() {
        for g in [Granularity::Document, Granularity::Sentence, Granularity::Chunk(2)] {
            assert!(split("", g).is_empty());
        }
    }

    #[test]
    fn leading_and_adjacent_separators_give_no_empty_units() {
        let seq = split(". Hello, . world! ", Granularity::Sentence);
        assert_eq!(texts(&seq), [". Hello", "world"]);
        assert_eq!(seq.separators, [", . ", "! "]);

        let seq = split(" ! ", Granularity::Sentence);
        assert_eq!(texts(&seq), [" ! "]);
        assert_eq!(seq.separators, [""]);
    }

    #[test]
    fn separator_patterns_details() {
        // Whitespace before punctuation is part of the separator.
        let seq = split("Ja , nein ; vielleicht", Granularity::Sentence);
        assert_eq!(texts(&seq), ["Ja", "nein", "vielleicht"]);
        assert_eq!(seq.separators, [" , ", " ; ", ""]);
        // Punctuation not followed by whitespace does not split.
        assert_eq!(split("3.14 is pi", Granularity::Sentence).len(), 1);
    }

    #[test]
    fn chunk_keeps_leading_and_trailing_nonwords() {
        let seq = split("\"How are you?\" she said. Fine", Granularity::Chunk(2));
        assert_eq!(texts(&seq), ["\"How are", "you?\" she", "said", "Fine"]);
        assert_eq!(seq.separators, [" ", " ", ". ", ""]);
    }

    #[test]
    fn chunk_sentence_without_words() {
        let seq = split("-- . Hi there", Granularity::Chunk(1));
        assert_eq!(texts(&seq), ["--", "Hi", "there"]);
        assert_eq!(seq.separators, [" . ", " ", ""]);
    }

    #[test]
    fn unicode_classes() {
        let text = "Grüße aus Köln。 Très bien! Ça va\u{3000}? ok";
        for g in [Granularity::Sentence, Granularity::Chunk(2)] {
            assert_eq!(reassemble(&split(text, g)).unwrap(), text);
        }
        assert_eq!(words("Grüße  aus"), ["Grüße", "aus"]);
    }

    #[test]
    fn granularity_parse() {
        assert_eq!("chunk:7".parse::<Granularity>().unwrap(), Granularity::Chunk(7));
        assert!("chunk:0".parse::<Granularity>().is_err());
        assert!("paragraph".parse::<Granularity>().is_err());
        assert_eq!(Granularity::Chunk(3).to_string(), "chunk:3");
    }

    #[test]
    fn word_pieces_rebuild() {
        let p = WordPieces::new("  hi, there!");
        assert_eq!(p.word_count(), 2);
        assert_eq!(p.rebuild(|i, w| format!("{w}{i}")), "  hi0, there1!");
        assert_eq!(p.rebuild(|_, w| w.to_string()), "  hi, there!");
    }

    fn arb_text() -> impl Strategy<Value = String> {
        let pieces = prop::sample::select(vec![
            "a", "word", "Ünï", "日本", "., ", " . ", "! ", "?", ";", "\t", "\n", " ", "\u{a0}",
            "\u{2003}", "🙂", "-", "'", "x1_", "  ,  ",
        ]);
        prop::collection::vec(pieces, 0..40).prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn round_trip(text in arb_text(), k in 1usize..6) {
            for g in [Granularity::Document, Granularity::Sentence, Granularity::Chunk(k)] {
                let seq = split(&text, g);
                prop_assert_eq!(reassemble(&seq).unwrap(), text.clone());
                prop_assert_eq!(seq.units.len(), seq.separators.len());
                prop_assert!(seq.units.iter().all(|u| !u.text.is_empty()));
                prop_assert!(seq.units.iter().enumerate().all(|(i, u)| u.index == i));
            }
        }

        #[test]
        fn chunk_word_counts(text in arb_text(), k in 1usize..5) {
            let sentences = split(&text, Granularity::Sentence);
            for s in &sentences.units {
                let chunks = split(&s.text, Granularity::Chunk(k));
                let counts: Vec<usize> = chunks.units.iter().map(|u| word_count(&u.text)).collect();
                if let Some((_, init)) = counts.split_last() {
                    prop_assert!(init.iter().all(|c| *c == k), "{:?}", counts);
                }
                prop_assert!(counts.last().is_none_or(|c| *c <= k));
            }
        }

        #[test]
        fn no_separator_means_one_unit(text in "[a-zA-Z ]{1,30}") {
            prop_assert_eq!(split(&text, Granularity::Sentence).len(), 1);
        }
    }

    #[test]
    fn split_corpus_records_reassemble() {
        use crate::datamodel::{to_jsonl_string, CorpusDoc};
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("c.jsonl");
        let docs = vec![CorpusDoc::new("a", "One. Two! Three"), CorpusDoc::new("b", "Solo")];
        std::fs::write(&src, to_jsonl_string(&docs)).unwrap();
        let out = dir.path().join("u.jsonl");
        let m = split_corpus(&src, Granularity::Sentence, &out).unwrap();
        assert_eq!(m.item_count, 4);
        let recs: Vec<UnitRecord> = std::fs::read_to_string(&out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let a: String = recs.iter().filter(|r| r.doc_id == "a").map(|r| format!("{}{}", r.text, r.separator)).collect();
        assert_eq!(a, "One. Two! Three");
        assert_eq!(recs[3].index, 0);
    }
}
