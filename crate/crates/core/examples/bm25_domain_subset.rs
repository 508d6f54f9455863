//! Carves a domain subset from a corpus: BM25 top-k against a query
//! document, united with every keyword match.

use xbarrier::datamodel::CorpusDoc;
use xbarrier::retrieval::{build_domain_subset, keyword_recall_curve, Bm25Params, DomainSubsetSpec};

fn main() {
    let texts = [
        "The wizard flew over the castle on a broom.",
        "Markets open early in the old town.",
        "A castle stood above the quiet river.",
        "Owls carried letters to the school of wizardry.",
        "The train to the coast was late again.",
        "He bought a new broom at the market.",
    ];
    let docs: Vec<CorpusDoc> = texts.iter().enumerate().map(|(i, t)| CorpusDoc::new(format!("d{i}"), *t)).collect();
    let query = "a young wizard at a castle school with owls";
    let keywords = vec!["broom".to_string()];
    let params = Bm25Params::default();

    let spec = DomainSubsetSpec::new(2, keywords.clone()).unwrap();
    let (subset, report) = build_domain_subset(&docs, query, &spec, &params).unwrap();
    println!(
        "top-k {} + keyword {} - overlap {} = {}",
        report.topk_size, report.keyword_size, report.overlap, report.final_size
    );
    for d in &subset {
        println!("  {}: {}", d.id, d.text);
    }
    let curve = keyword_recall_curve(&docs, query, &keywords, &params, &[1, 2, 4, 6]).unwrap();
    println!("keyword docs within top k: {curve:?}");
}
