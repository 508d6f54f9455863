//! Mock translations through a persistent cache: a second translator opened
//! on the same directory answers from disk without calling its backend.

use std::sync::Arc;

use xbarrier::datamodel::LanguageTag;
use xbarrier::translate::{BackendSpec, TranslationCache, TranslationRequest, Translator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let en = LanguageTag::english();
    let reqs: Vec<TranslationRequest> = ["fr", "de", "es"]
        .iter()
        .map(|t| TranslationRequest {
            text: "the river is quiet".into(),
            source: en.clone(),
            target: LanguageTag::parse(t).unwrap(),
        })
        .collect();

    let tr = Translator::from_spec(&BackendSpec::mock(), Arc::new(TranslationCache::open(dir.path())?))?;
    for (r, out) in reqs.iter().zip(tr.translate_batch(&reqs).map_err(|e| e.to_string())?) {
        println!("{} -> {}: {out}", r.source, r.target);
    }

    let replay = Translator::from_spec(&BackendSpec::cache_only("mock"), Arc::new(TranslationCache::open(dir.path())?))?;
    println!("cache-only replay: {}", replay.translate(&reqs[1])?);
    Ok(())
}
