//! Mixed-language rewrite of a small corpus at sentence granularity.

use xbarrier::datamodel::{CorpusDoc, LanguageSet};
use xbarrier::rng::RngSpec;
use xbarrier::translate::Translator;
use xbarrier::unitsplit::Granularity;
use xbarrier::variantgen::mix_document;

fn main() {
    let docs = [
        CorpusDoc::new("d1", "Harry opened the letter. It was from the school. He read it twice."),
        CorpusDoc::new("d2", "The train left at eleven. Nobody on the platform noticed the owl."),
    ];
    let pool = LanguageSet::default_pool();
    let tr = Translator::mock();
    for seed in [1, 2] {
        println!("seed {seed}");
        for d in &docs {
            let mixed = mix_document(d, Granularity::Sentence, &pool, &RngSpec::new(seed), &tr).unwrap();
            println!("  {}: {}", mixed.id, mixed.text);
        }
    }
}
