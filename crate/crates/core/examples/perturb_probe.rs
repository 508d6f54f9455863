//! Perturbs a corpus three ways and compares how far each moves the
//! embeddings of a bag-of-words mock provider.

use std::sync::Arc;

use xbarrier::datamodel::{CorpusDoc, LanguageSet};
use xbarrier::embedprobe::{describe_tests, run_probe};
use xbarrier::evalharness::{Knowledge, MockModel, MockModelSpec};
use xbarrier::rng::RngSpec;
use xbarrier::translate::Translator;
use xbarrier::variantgen::{perturb, PerturbSpec, Vocab};

const WORDS: [&str; 12] = [
    "river", "mill", "stars", "quiet", "hills", "people", "walk", "home", "bright", "lantern", "market", "bridge",
];

fn main() {
    let docs: Vec<CorpusDoc> = (0..60)
        .map(|i| {
            let text: Vec<&str> = (0..20).map(|j| WORDS[(i * 7 + j * 5 + j * j) % WORDS.len()]).collect();
            CorpusDoc::new(format!("doc-{i}"), text.join(" "))
        })
        .collect();
    let pool = LanguageSet::default_pool();
    let vocab = Vocab::new(["apple", "banana", "cherry", "plum"]).unwrap();
    let specs: Vec<PerturbSpec> = ["word-translate:0.2", "token-replace:0.16", "dropout:0.16"]
        .iter()
        .map(|s| PerturbSpec::parse(s, &pool, Some(&vocab)).unwrap())
        .collect();
    let rng = RngSpec::new(7);
    let tr = Translator::mock();

    for s in &specs {
        let out = perturb(&docs[0].id, &docs[0].text, s, &rng, &tr).unwrap();
        println!("{s}: {} of {} words changed\n  {}", out.changed, out.words, out.text);
    }

    let provider = MockModel::new(MockModelSpec::BowEmbed, Arc::new(Knowledge::default()));
    let report = run_probe(&docs, &specs, &provider, &rng, &tr).unwrap();
    for v in &report.versions {
        println!("{:<20} mean cosine {:.4} (sd {:.4})", v.version, v.mean, v.std);
    }
    println!("{}", describe_tests(&report));
}
