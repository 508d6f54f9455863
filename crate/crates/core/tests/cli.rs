mod common;

use common::{populate, run_in, stderr};
use xbarrier::datamodel::DatasetManifest;
use xbarrier::evalharness::EvalReport;

#[test]
fn help_exits_zero_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["gen-variants", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("Usage:") && out.contains("--variant"));
}

#[test]
fn missing_in_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["gen-variants", "--variant", "mixup", "--out", "x.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--in"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_rejected_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["split", "--granularity", "sentence", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage:"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    populate(dir.path());
    let o = run_in(dir.path(), &["split", "--granularity", "chunk:0", "--in", "corpus.jsonl", "--out", "u.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run_in(dir.path(), &["gen-variants", "--variant", "sideways", "--in", "test.jsonl", "--out", "v.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sideways"));
}

#[test]
fn unreachable_backends_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    populate(dir.path());
    let o = run_in(dir.path(), &["eval", "--dataset", "test.jsonl", "--model", "http://127.0.0.1:9", "--out", "r.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run_in(
        dir.path(),
        &["gen-variants", "--variant", "full", "--backend", "cache-only:nothing", "--in", "test.jsonl", "--out", "v.jsonl"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn full_offline_pipeline_writes_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    populate(d);
    let steps: Vec<Vec<&str>> = vec![
        vec!["split", "--granularity", "sentence", "--in", "corpus.jsonl", "--out", "units.jsonl"],
        vec!["--cache", "cache", "cache", "warm", "--in", "requests.jsonl", "--backend", "mock"],
        vec!["gen-variants", "--variant", "mixup", "--seed", "4", "--in", "test.jsonl", "--out", "mixup.jsonl"],
        vec!["gen-variants", "--variant", "gt", "--target-lang", "fr", "--in", "test.jsonl", "--out", "gt.jsonl"],
        vec!["mix-corpus", "--granularity", "chunk:3", "--in", "corpus.jsonl", "--out", "mixed.jsonl"],
        vec!["perturb", "--mode", "dropout:0.16", "--in", "corpus.jsonl", "--out", "dropout.jsonl"],
        vec!["retrieve", "--query", "query.txt", "--keywords", "keywords.txt", "--top-k", "10", "--in", "corpus.jsonl", "--out", "subset.jsonl", "--report", "retrieval.json"],
        vec!["eval", "--dataset", "test.jsonl", "--model", "mock:english-anchored", "--out", "eval_en.json"],
        vec!["eval", "--dataset", "gt.jsonl", "--model", "mock:english-anchored", "--out", "eval_gt.json"],
        vec!["eval", "--dataset", "mixup.jsonl", "--dev", "dev.jsonl", "--shots", "5", "--demos", "samebias", "--model", "mock:english-anchored", "--out", "eval_mix.json"],
        vec!["eval", "--task", "qa", "--dataset", "qa.jsonl", "--model", "mock:always-correct", "--out", "eval_qa.json"],
        vec!["probe", "--in", "corpus.jsonl", "--sample", "30", "--perturb", "word-translate:0.2,token-replace:0.16,dropout:0.16", "--vocab", "vocab.txt", "--provider", "mock:bow", "--out", "probe.json"],
        vec!["report", "eval_en.json", "eval_gt.json", "eval_mix.json", "--out", "merged.json"],
    ];
    for args in &steps {
        let o = run_in(d, args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    }
    for out in ["units.jsonl", "mixup.jsonl", "gt.jsonl", "mixed.jsonl", "dropout.jsonl", "subset.jsonl"] {
        let m = DatasetManifest::load_sidecar(&d.join(out)).unwrap().expect(out);
        assert!(m.details.contains_key("config"), "{out} manifest lacks config");
    }
    assert!(d.join("mixed.jsonl.finetune.json").exists());
    for f in ["retrieval.json", "probe.csv", "probe.svg", "merged.csv", "merged.mock_english-anchored.svg"] {
        assert!(d.join(f).exists(), "{f}");
    }

    let en = EvalReport::load(&d.join("eval_en.json")).unwrap();
    assert_eq!(en.totals.accuracy(), Some(1.0));
    assert_eq!(en.manifest.details["config"]["command"]["model"], "mock:english-anchored");
    let gt = EvalReport::load(&d.join("eval_gt.json")).unwrap();
    assert_eq!(gt.summary_accuracy("fr"), Some(0.0));
    assert_eq!(gt.manifest.dataset_id, en.manifest.dataset_id);

    let csv = std::fs::read_to_string(d.join("merged.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (acc, eng, delta) = (&rec[9], &rec[10], &rec[11]);
        if !acc.is_empty() && !eng.is_empty() {
            let want = eng.parse::<f64>().unwrap() - acc.parse::<f64>().unwrap();
            assert!((delta.parse::<f64>().unwrap() - want).abs() < 1e-6);
        }
    }
}

#[test]
fn report_rejects_mixed_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    populate(d);
    common::write_records(&d.join("other.jsonl"), &common::mcq_fixture(8, "other"));
    for (data, out) in [("test.jsonl", "a.json"), ("other.jsonl", "b.json")] {
        let o = run_in(d, &["eval", "--dataset", data, "--model", "mock:always-correct", "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = run_in(d, &["report", "a.json", "b.json", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dataset id"));
}

#[test]
fn config_file_supplies_options_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    populate(d);
    std::fs::write(
        d.join("run.toml"),
        "seed = 3\n[gen-variants]\nvariant = \"options\"\ntarget-lang = \"de\"\nin = \"test.jsonl\"\nout = \"cfg.jsonl\"\n",
    )
    .unwrap();
    let o = run_in(d, &["gen-variants", "--config", "run.toml", "--target-lang", "es"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = DatasetManifest::load_sidecar(&d.join("cfg.jsonl")).unwrap().unwrap();
    assert_eq!(m.variant.as_deref(), Some("options:es"));
    assert_eq!(m.seed, Some(3));
    assert_eq!(m.details["config"]["command"]["target_lang"], "es");
}

#[test]
fn cache_warm_makes_cache_only_runs_possible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    populate(d);
    let o = run_in(d, &["--cache", "c", "cache", "warm", "--in", "requests.jsonl"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run_in(d, &["gen-variants", "--variant", "full", "--target-lang", "fr", "--cache", "c", "--in", "test.jsonl", "--out", "a.jsonl"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run_in(
        d,
        &["gen-variants", "--variant", "full", "--target-lang", "fr", "--cache", "c", "--backend", "cache-only:mock", "--in", "test.jsonl", "--out", "b.jsonl"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(d.join("a.jsonl")).unwrap(), std::fs::read(d.join("b.jsonl")).unwrap());
}
