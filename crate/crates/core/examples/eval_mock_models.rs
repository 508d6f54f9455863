//! Scores the mock models on English and translated variants of a fixture,
//! reproducing the accuracy drop when the correct option is translated.

use std::sync::Arc;

use xbarrier::datamodel::{DomainCategory, LanguageSet, LanguageTag, McqItem, McqLang};
use xbarrier::evalharness::{run_eval, DemoPool, EvalDataset, EvalOptions, Knowledge, MockModel, MockModelSpec};
use xbarrier::rng::RngSpec;
use xbarrier::translate::Translator;
use xbarrier::variantgen::{gen_mcq_variant, Target, VariantKind};

fn main() {
    let items: Vec<McqItem> = (0..200)
        .map(|i| McqItem {
            id: format!("q{i}"),
            subject: "world_religions".into(),
            domain_category: DomainCategory::Humanities,
            question: format!("Which statement {i} is correct?"),
            options: [0, 1, 2, 3].map(|j| format!("statement {i}.{j}")),
            answer: (i * 7) % 4,
            lang: McqLang::uniform(LanguageTag::english()),
        })
        .collect();
    let knowledge = Arc::new(Knowledge::from_mcq(&items));
    let pool = LanguageSet::default_pool();
    let tr = Translator::mock();

    let mut datasets = vec![EvalDataset::from_items(items.clone(), "original")];
    for kind in [VariantKind::Mixup, VariantKind::GtOption(Target::Random), VariantKind::OneWrongOption(Target::Random)] {
        let v: Vec<McqItem> = items.iter().map(|i| gen_mcq_variant(i, &kind, &pool, &RngSpec::new(1), &tr).unwrap()).collect();
        datasets.push(EvalDataset::from_items(v, &kind.to_string()));
    }

    for spec in [MockModelSpec::AlwaysCorrect, MockModelSpec::EnglishAnchored, MockModelSpec::UniformRandom { seed: 5 }] {
        let model = MockModel::new(spec, knowledge.clone());
        let row: Vec<String> = datasets
            .iter()
            .map(|ds| {
                let r = run_eval(ds, &EvalOptions::default(), &DemoPool::empty(), &model).unwrap();
                format!("{}={:.3}", ds.variant, r.totals.accuracy().unwrap_or(f64::NAN))
            })
            .collect();
        println!("{spec:<28} {}", row.join("  "));
    }
}
