//! Merges reports for several variants of one dataset into a table with
//! English-anchored deltas, and writes JSON, CSV and SVG.

use std::sync::Arc;

use xbarrier::datamodel::{DomainCategory, LanguageSet, LanguageTag, McqItem, McqLang};
use xbarrier::evalharness::{
    merge_reports, run_eval, DemoPool, EvalDataset, EvalOptions, Knowledge, MockModel, MockModelSpec,
};
use xbarrier::rng::RngSpec;
use xbarrier::translate::Translator;
use xbarrier::variantgen::{gen_mcq_variant, Target, VariantKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let items: Vec<McqItem> = (0..120)
        .map(|i| McqItem {
            id: format!("m{i}"),
            subject: "marketing".into(),
            domain_category: DomainCategory::Others,
            question: format!("Which tactic {i} works?"),
            options: [0, 1, 2, 3].map(|j| format!("tactic {i}.{j}")),
            answer: i % 4,
            lang: McqLang::uniform(LanguageTag::english()),
        })
        .collect();
    let model = MockModel::new(MockModelSpec::EnglishAnchored, Arc::new(Knowledge::from_mcq(&items)));
    let original = EvalDataset::from_items(items.clone(), "original");
    let tr = Translator::mock();

    let mut reports = Vec::new();
    for kind in [None, Some(VariantKind::Full(Target::Random)), Some(VariantKind::OptionsOnly(Target::Random))] {
        let mut ds = original.clone();
        if let Some(k) = &kind {
            ds.items = items
                .iter()
                .map(|i| gen_mcq_variant(i, k, &LanguageSet::default_pool(), &RngSpec::new(2), &tr))
                .collect::<Result<_, _>>()?;
            ds.variant = k.to_string();
        }
        let r = run_eval(&ds, &EvalOptions::default(), &DemoPool::empty(), &model)?;
        reports.push((ds.variant.clone(), r));
    }

    let merged = merge_reports(&reports)?;
    print!("{}", merged.to_csv());
    let dir = tempfile::tempdir()?;
    for p in merged.write_all(&dir.path().join("merged.json"))? {
        println!("wrote {}", p.file_name().unwrap().to_string_lossy());
    }
    Ok(())
}
