#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xbarrier::datamodel::{to_jsonl_string, CorpusDoc, DomainCategory, LanguageTag, McqItem, McqLang, QaItem};

pub const SUBJECTS: [&str; 4] = ["astronomy", "high_school_biology", "world_religions", "marketing"];

const WORDS: [&str; 24] = [
    "river", "mill", "stars", "quiet", "hills", "people", "walk", "home", "bright", "lantern", "market", "old",
    "bridge", "winter", "garden", "letter", "castle", "wizard", "forest", "train", "school", "owl", "broom", "map",
];

/// English four-option items with answers cycling 0..4 and distinct texts.
pub fn mcq_fixture(n: usize, prefix: &str) -> Vec<McqItem> {
    (0..n)
        .map(|i| {
            let subject = SUBJECTS[i % SUBJECTS.len()];
            McqItem {
                id: format!("{prefix}-{i:04}"),
                subject: subject.to_string(),
                domain_category: DomainCategory::Others,
                question: format!("Which statement about {subject} item {i} is true?"),
                options: [0, 1, 2, 3].map(|j| format!("statement {j} about item {i}")),
                answer: (i / SUBJECTS.len() + i) % 4,
                lang: McqLang::uniform(LanguageTag::english()),
            }
        })
        .collect()
}

pub fn qa_fixture(n: usize) -> Vec<QaItem> {
    (0..n)
        .map(|i| QaItem {
            id: format!("qa-{i}"),
            question: format!("What does the owl number {i} carry?"),
            reference_answer: format!("the owl carries letter {i}"),
            lang: LanguageTag::english(),
        })
        .collect()
}

fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// Documents of a few sentences each over a small vocabulary.
pub fn corpus_fixture(n: usize, seed: u64) -> Vec<CorpusDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sentences = rng.random_range(2..6);
            let text: Vec<String> = (0..sentences)
                .map(|_| {
                    let len = rng.random_range(6..16);
                    sentence(&mut rng, len)
                })
                .collect();
            CorpusDoc::new(format!("doc-{i:04}"), format!("{}.", text.join(". ")))
        })
        .collect()
}

pub fn write_records<T: serde::Serialize>(path: &Path, records: &[T]) {
    std::fs::write(path, to_jsonl_string(records)).unwrap();
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_xbarrier"))
}

/// Runs the binary in `dir` with a fixed creation timestamp and no ambient cache.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("XBARRIER_CACHE")
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small offline workspace: test/dev MCQ splits, QA items, a corpus, a
/// retrieval query, keywords, a vocabulary and translation requests.
pub fn populate(dir: &Path) {
    write_records(&dir.join("test.jsonl"), &mcq_fixture(40, "test"));
    write_records(&dir.join("dev.jsonl"), &mcq_fixture(24, "dev"));
    write_records(&dir.join("qa.jsonl"), &qa_fixture(12));
    write_records(&dir.join("corpus.jsonl"), &corpus_fixture(60, 11));
    std::fs::write(dir.join("query.txt"), "wizard owl broom castle").unwrap();
    std::fs::write(dir.join("keywords.txt"), "wizard\nbroom\n").unwrap();
    std::fs::write(dir.join("vocab.txt"), "apple\nbanana\ncherry\ndelta\nember\n").unwrap();
    let reqs: String = (0..20)
        .map(|i| format!("{{\"text\":\"word {}\",\"source\":\"en\",\"target\":\"{}\"}}\n", i % 7, ["fr", "de"][i % 2]))
        .collect();
    std::fs::write(dir.join("requests.jsonl"), reqs).unwrap();
}
