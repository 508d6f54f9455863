//! Open-ended QA scored with ROUGE-L, English versus translated questions.

use std::sync::Arc;

use xbarrier::datamodel::{write_jsonl, LanguageTag, QaItem};
use xbarrier::evalharness::{rouge_l, run_qa_eval, Knowledge, MockModel, MockModelSpec};
use xbarrier::translate::mock_translate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("rouge-l(the cat sat, the dog sat) = {:.4}", rouge_l("the cat sat", "the dog sat").f1);

    let en = LanguageTag::english();
    let mut items: Vec<QaItem> = (0..6)
        .map(|i| QaItem {
            id: format!("qa{i}"),
            question: format!("Where was author {i} born?"),
            reference_answer: format!("author {i} was born in a small harbour town"),
            lang: en.clone(),
        })
        .collect();
    let mut knowledge = Knowledge::default();
    knowledge.add_qa(&items);
    let fr = LanguageTag::parse("fr")?;
    for item in items.iter_mut().take(3) {
        item.question = mock_translate(&item.question, &en, &fr);
        item.lang = fr.clone();
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("qa.jsonl");
    write_jsonl(&path, &items)?;
    let model = MockModel::new(MockModelSpec::EnglishAnchored, Arc::new(knowledge));
    let report = run_qa_eval(&path, &items, 32, &model)?;
    for row in &report.summary {
        println!("{:<3} n={} mean f1={:.3}", row.language, row.n, row.mean_f1.unwrap_or(f64::NAN));
    }
    Ok(())
}
