//! Command-line front end.
//!
//! Every option can also come from a TOML file given with `--config`.
//! Top-level keys set global options; a table named after a subcommand sets
//! that subcommand's options. Keys are long flag names without the dashes,
//! arrays are joined with commas, and flags on the command line win:
//!
//! ```toml
//! seed = 7
//! [gen-variants]
//! variant = "mixup"
//! langs = ["en", "fr", "de", "es", "it"]
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::datamodel::{read_jsonl, CorpusDoc, DataError, DatasetManifest, LanguageSet, McqItem, QaItem};
use crate::embedprobe::{describe_tests, run_probe, sample_docs, ProbeError};
use crate::evalharness::{
    build_model, merge_reports, run_eval, run_qa_eval, DemoPool, DemoStrategy, DemoTransform, EvalDataset,
    EvalError, EvalOptions, EvalReport, Instruction, Knowledge, OptionIds, PromptTemplate, Strategy,
};
use crate::retrieval::{retrieve_files, Bm25Params, RetrievalError};
use crate::rng::RngSpec;
use crate::translate::{BackendSpec, TranslateError, TranslationCache, TranslationRequest, Translator};
use crate::unitsplit::{split_corpus, Granularity};
use crate::variantgen::{
    gen_variant_dataset, mix_corpus, perturb_corpus, PerturbSpec, Target, VariantError, VariantKind, Vocab,
};

/// Environment variable holding the default translation cache directory.
pub const CACHE_ENV: &str = "XBARRIER_CACHE";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_BACKEND: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "xbarrier", version, about = "Crosslingual dataset construction and evaluation")]
pub struct Cli {
    /// Worker threads (0 = one per core). Never changes output bytes.
    #[arg(long, global = true, default_value_t = 0)]
    #[serde(skip)]
    pub jobs: usize,
    /// Translation cache directory; defaults to $XBARRIER_CACHE, else memory only.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    #[serde(skip)]
    pub log_level: String,
    /// TOML file with option defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Split corpus documents into translation units.
    Split(SplitArgs),
    /// Translation cache maintenance.
    #[command(subcommand)]
    Cache(CacheCommand),
    /// Build a crosslingual MCQ variant dataset.
    GenVariants(GenVariantsArgs),
    /// Build a mixed-language corpus.
    MixCorpus(MixCorpusArgs),
    /// Perturb corpus documents for embedding probes.
    Perturb(PerturbArgs),
    /// Select a domain subset with BM25 and keywords.
    Retrieve(RetrieveArgs),
    /// Evaluate a model on an MCQ or open-ended dataset.
    Eval(EvalArgs),
    /// Compare embeddings of original and perturbed documents.
    Probe(ProbeArgs),
    /// Merge evaluation reports into CSV, JSON and SVG.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum CacheCommand {
    /// Translate a request file so later runs hit the cache.
    Warm(WarmArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// document, sentence or chunk:K.
    #[arg(long)]
    pub granularity: String,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WarmArgs {
    /// JSONL of {"text","source","target"} requests.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// mock, http:URL or cache-only:ID.
    #[arg(long, default_value = "mock")]
    pub backend: String,
}

#[derive(Debug, Args, Serialize)]
pub struct GenVariantsArgs {
    /// mixup, full, question, options, question-gt, gt or one-wrong.
    #[arg(long)]
    pub variant: String,
    /// A language code, or `random` to draw one per item.
    #[arg(long, default_value = "random")]
    pub target_lang: String,
    /// Language set; the first entry is the pivot.
    #[arg(long, value_delimiter = ',', default_value = "en,fr,de,es,it")]
    pub langs: Vec<String>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "mock")]
    pub backend: String,
}

#[derive(Debug, Args, Serialize)]
pub struct MixCorpusArgs {
    #[arg(long, default_value = "sentence")]
    pub granularity: String,
    #[arg(long, value_delimiter = ',', default_value = "en,fr,de,es,it")]
    pub langs: Vec<String>,
    /// Training steps recorded in the recipe sidecar (default: one epoch).
    #[arg(long)]
    pub finetune_steps: Option<usize>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "mock")]
    pub backend: String,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    /// word-translate:P, token-replace:P or dropout:P.
    #[arg(long)]
    pub mode: String,
    #[arg(long, value_delimiter = ',', default_value = "en,fr,de,es,it")]
    pub langs: Vec<String>,
    /// Replacement vocabulary, one token per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "mock")]
    pub backend: String,
}

#[derive(Debug, Args, Serialize)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub top_k: usize,
    #[arg(long, default_value_t = 1.5)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// mcq or qa.
    #[arg(long, default_value = "mcq")]
    pub task: String,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Dev split for demonstrations; required when --shots > 0.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// maxprob or firsttoken.
    #[arg(long, default_value = "maxprob")]
    pub strategy: String,
    /// default, aware0 or aware1.
    #[arg(long, default_value = "default")]
    pub template: String,
    /// ABCD, abcd or 1234.
    #[arg(long, default_value = "ABCD")]
    pub ids: String,
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    /// english, samebias or translate-then-answer (default english when shots > 0).
    #[arg(long)]
    pub demos: Option<String>,
    /// mock:<name> or http:URL.
    #[arg(long)]
    pub model: String,
    /// Translation backend for same-bias demonstrations.
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long, default_value_t = 8)]
    pub max_tokens: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub sample: usize,
    /// Comma-separated perturbations, e.g. word-translate:0.2,dropout:0.16.
    #[arg(long, value_delimiter = ',', required = true)]
    pub perturb: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "en,fr,de,es,it")]
    pub langs: Vec<String>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// mock:hash, mock:bow or http:URL.
    #[arg(long)]
    pub provider: String,
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Evaluation report files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Merged JSON; `.csv` and per-model `.svg` files are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

/// A failure with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        invalid(e)
    }
}

impl From<TranslateError> for CliError {
    fn from(e: TranslateError) -> Self {
        if e.is_backend_failure() {
            CliError::Backend(e.to_string())
        } else {
            invalid(e)
        }
    }
}

impl From<VariantError> for CliError {
    fn from(e: VariantError) -> Self {
        if e.is_backend_failure() {
            CliError::Backend(e.to_string())
        } else {
            invalid(e)
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match &e {
            EvalError::Model(m) if m.is_backend_failure() => CliError::Backend(e.to_string()),
            _ => invalid(e),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        invalid(e)
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        invalid(e)
    }
}

const SUBCOMMANDS: [&str; 9] = [
    "split", "cache", "gen-variants", "mix-corpus", "perturb", "retrieve", "eval", "probe", "report",
];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn toml_flags(table: &toml::Table, out: &mut Vec<OsString>) -> Result<(), CliError> {
    for (key, value) in table {
        if value.is_table() {
            continue;
        }
        let flag = format!("--{key}");
        let scalar = |v: &toml::Value| -> Result<String, CliError> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                other => Err(invalid(format!("config key {key}: unsupported value {other}"))),
            }
        };
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar(v)?.into());
            }
        }
    }
    Ok(())
}

/// Splices config-file options in front of the command-line ones so that
/// later (command-line) occurrences override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    let Some(pos) = args.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(args);
    };
    let sub = args[pos].to_string_lossy().to_string();
    // `cache` nests one more level; its options follow the action name.
    let insert_at = if sub == "cache" { (pos + 2).min(args.len()) } else { pos + 1 };

    let mut global = Vec::new();
    toml_flags(&table, &mut global)?;
    let mut local = Vec::new();
    if let Some(toml::Value::Table(t)) = table.get(&sub) {
        toml_flags(t, &mut local)?;
    }
    let mut out = vec![args[0].clone()];
    out.extend(global);
    out.extend(args[1..insert_at].iter().cloned());
    out.extend(local);
    out.extend(args[insert_at..].iter().cloned());
    Ok(out)
}

/// Parses `args` (including the program name), honouring `--config`.
pub fn parse(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let args = expand_config(args).map_err(|e| {
        Cli::command().error(clap::error::ErrorKind::InvalidValue, e.to_string())
    })?;
    let cmd = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|c| c.args_override_self(true).mut_subcommands(|c| c.args_override_self(true)));
    let matches = cmd.try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

fn parse_langs(list: &[String]) -> Result<LanguageSet, CliError> {
    LanguageSet::parse_list(&list.join(",")).map_err(invalid)
}

struct Context {
    cache: Arc<TranslationCache>,
    seed: u64,
    config: Value,
}

impl Context {
    fn translator(&self, backend: &str) -> Result<Translator, CliError> {
        let spec: BackendSpec = backend.parse()?;
        Ok(Translator::from_spec(&spec, self.cache.clone())?)
    }

    fn rng(&self) -> RngSpec {
        RngSpec::new(self.seed)
    }

    /// Adds the resolved configuration to a written manifest.
    fn record(&self, out: &Path, mut manifest: DatasetManifest) -> Result<(), CliError> {
        manifest.details.insert("config".into(), self.config.clone());
        let count = manifest.item_count;
        manifest.finish(out, count)?;
        Ok(())
    }
}

fn load_vocab(path: Option<&Path>) -> Result<Option<Vocab>, CliError> {
    path.map(Vocab::load).transpose().map_err(CliError::from)
}

fn run_split(ctx: &Context, a: &SplitArgs) -> Result<(), CliError> {
    let g: Granularity = a.granularity.parse().map_err(invalid)?;
    let m = split_corpus(&a.input, g, &a.out)?;
    log::info!("split {} documents into {} units", m.details["documents"], m.item_count);
    ctx.record(&a.out, m)
}

fn run_warm(ctx: &Context, a: &WarmArgs) -> Result<(), CliError> {
    if !ctx.cache.is_persistent() {
        return Err(invalid(format!("cache warm needs --cache DIR or ${CACHE_ENV}")));
    }
    let reqs: Vec<TranslationRequest> = {
        let text = std::fs::read_to_string(&a.input).map_err(|e| DataError::io(&a.input, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| invalid(format!("{}:{}: {e}", a.input.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?
    };
    let translator = ctx.translator(&a.backend)?;
    let before = ctx.cache.len();
    match translator.translate_batch(&reqs) {
        Ok(out) => {
            log::info!("warmed {} requests, {} new cache entries", out.len(), ctx.cache.len() - before);
            Ok(())
        }
        Err(e) => {
            let failed: Vec<String> = e.failures.iter().map(|(i, _)| i.to_string()).collect();
            let msg = format!("{e}; failed request indices: {}", failed.join(","));
            if e.failures.iter().any(|(_, f)| f.is_backend_failure()) {
                Err(CliError::Backend(msg))
            } else {
                Err(invalid(msg))
            }
        }
    }
}

fn run_gen_variants(ctx: &Context, a: &GenVariantsArgs) -> Result<(), CliError> {
    let target: Target = a.target_lang.parse()?;
    let kind = VariantKind::from_parts(&a.variant, target)?;
    let langs = parse_langs(&a.langs)?;
    let translator = ctx.translator(&a.backend)?;
    let m = gen_variant_dataset(&a.input, &kind, &langs, &ctx.rng(), &translator, &a.out)?;
    log::info!("wrote {} {} items to {}", m.item_count, kind, a.out.display());
    ctx.record(&a.out, m)
}

fn run_mix_corpus(ctx: &Context, a: &MixCorpusArgs) -> Result<(), CliError> {
    let g: Granularity = a.granularity.parse().map_err(invalid)?;
    let langs = parse_langs(&a.langs)?;
    let translator = ctx.translator(&a.backend)?;
    let m = mix_corpus(&a.input, g, &langs, &ctx.rng(), &translator, &a.out, a.finetune_steps)?;
    ctx.record(&a.out, m)
}

fn run_perturb(ctx: &Context, a: &PerturbArgs) -> Result<(), CliError> {
    let langs = parse_langs(&a.langs)?;
    let vocab = load_vocab(a.vocab.as_deref())?;
    let spec = PerturbSpec::parse(&a.mode, &langs, vocab.as_ref())?;
    let translator = ctx.translator(&a.backend)?;
    let m = perturb_corpus(&a.input, &spec, &ctx.rng(), &translator, &a.out, a.vocab.as_deref())?;
    ctx.record(&a.out, m)
}

fn run_retrieve(ctx: &Context, a: &RetrieveArgs) -> Result<(), CliError> {
    let params = Bm25Params {
        k1: a.k1,
        b: a.b,
        epsilon: a.epsilon,
    };
    let report = retrieve_files(&a.input, &a.query, a.keywords.as_deref(), a.top_k, &params, &a.out, &a.report)?;
    log::info!(
        "kept {} of {} documents ({} by rank, {} by keyword)",
        report.final_size,
        report.corpus_size,
        report.topk_size,
        report.keyword_size
    );
    let m = DatasetManifest::load_sidecar(&a.out)?.ok_or_else(|| invalid("retrieval manifest missing"))?;
    ctx.record(&a.out, m)
}

fn preflight(model: &dyn crate::evalharness::ModelClient) -> Result<(), CliError> {
    model
        .health()
        .map_err(|e| CliError::Backend(format!("model {} is not reachable: {e}", model.id())))
}

fn run_eval_cmd(ctx: &Context, a: &EvalArgs) -> Result<(), CliError> {
    match a.task.as_str() {
        "mcq" => run_mcq(ctx, a),
        "qa" => {
            let items: Vec<QaItem> = read_jsonl(&a.dataset)?;
            let mut k = Knowledge::default();
            k.add_qa(&items);
            let model = build_model(&a.model, Arc::new(k)).map_err(invalid)?;
            preflight(model.as_ref())?;
            let mut report = run_qa_eval(&a.dataset, &items, a.max_tokens, model.as_ref())?;
            report.manifest.details.insert("config".into(), ctx.config.clone());
            report.write(&a.out)?;
            let failed: usize = report.summary.iter().map(|r| r.failed).sum();
            if !items.is_empty() && failed == items.len() {
                return Err(CliError::Backend(format!("every model call failed; see {}", a.out.display())));
            }
            Ok(())
        }
        other => Err(invalid(format!("unknown task {other:?}; expected mcq or qa"))),
    }
}

fn run_mcq(ctx: &Context, a: &EvalArgs) -> Result<(), CliError> {
    let strategy: Strategy = a.strategy.parse()?;
    let instruction: Instruction = a.template.parse().map_err(invalid)?;
    let ids: OptionIds = a.ids.parse().map_err(invalid)?;
    let demos: DemoStrategy = match (&a.demos, a.shots) {
        (Some(d), _) => d.parse().map_err(invalid)?,
        (None, 0) => DemoStrategy::None,
        (None, _) => DemoStrategy::English,
    };
    let template = PromptTemplate::new(instruction, ids, a.shots, demos)?;
    let opts = EvalOptions {
        template,
        strategy,
        max_tokens: a.max_tokens,
    };

    let dataset = EvalDataset::load(&a.dataset)?;
    let dev: Vec<McqItem> = match (&a.dev, a.shots) {
        (_, 0) => Vec::new(),
        (Some(p), _) => read_jsonl(p)?,
        (None, _) => return Err(invalid("--dev is required when --shots > 0")),
    };
    let mut knowledge = Knowledge::from_mcq(&dataset.items);
    knowledge.add_mcq(&dev);
    let model = build_model(&a.model, Arc::new(knowledge)).map_err(invalid)?;
    preflight(model.as_ref())?;

    let translator = ctx.translator(&a.backend)?;
    let source = DatasetManifest::load_sidecar(&a.dataset)?;
    let transform = match (&source, demos) {
        (Some(m), DemoStrategy::SameBias | DemoStrategy::TranslateThenAnswer) if m.variant.is_some() => {
            Some(DemoTransform {
                kind: m.variant.as_deref().unwrap_or_default().parse()?,
                langs: m.language_set.clone().unwrap_or_else(LanguageSet::default_pool),
                rng: RngSpec::new(m.seed.unwrap_or(ctx.seed)),
                translator: &translator,
            })
        }
        _ => None,
    };
    let pool = DemoPool::build(&dev, &template, transform.as_ref())?;
    let mut report = run_eval(&dataset, &opts, &pool, model.as_ref())?;
    report.manifest.dev_path = a.dev.as_ref().map(|p| p.display().to_string());
    report.manifest.details.insert("config".into(), ctx.config.clone());
    report.write(&a.out)?;
    if let Some(acc) = report.totals.accuracy() {
        log::info!("accuracy {acc:.4} over {} items", report.totals.evaluated);
    }
    if report.totals.n > 0 && report.totals.failed == report.totals.n {
        let first = report.predictions.iter().find_map(|p| p.error.clone()).unwrap_or_default();
        return Err(CliError::Backend(format!("every model call failed: {first}")));
    }
    Ok(())
}

fn run_probe_cmd(ctx: &Context, a: &ProbeArgs) -> Result<(), CliError> {
    let langs = parse_langs(&a.langs)?;
    let vocab = load_vocab(a.vocab.as_deref())?;
    let specs: Vec<PerturbSpec> = a
        .perturb
        .iter()
        .map(|s| PerturbSpec::parse(s, &langs, vocab.as_ref()))
        .collect::<Result<_, _>>()?;
    let docs: Vec<CorpusDoc> = read_jsonl(&a.input)?;
    let rng = ctx.rng();
    let sample = sample_docs(&docs, a.sample, &rng);
    let provider = build_model(&a.provider, Arc::new(Knowledge::default())).map_err(invalid)?;
    preflight(provider.as_ref())?;
    let translator = ctx.translator(&a.backend)?;
    let mut report = run_probe(&sample, &specs, provider.as_ref(), &rng, &translator)?;
    report.manifest.details.insert("config".into(), ctx.config.clone());
    if let Some(v) = &a.vocab {
        report.manifest.details.insert("vocab_path".into(), v.display().to_string().into());
    }
    report.write_all(&a.out)?;
    for line in describe_tests(&report).lines() {
        log::info!("{line}");
    }
    if report.rows.is_empty() && !report.failures.is_empty() {
        return Err(CliError::Backend(format!(
            "every document failed; first: {}",
            report.failures[0].error
        )));
    }
    Ok(())
}

fn run_report(a: &ReportArgs) -> Result<(), CliError> {
    let reports: Vec<(String, EvalReport)> = a
        .reports
        .iter()
        .map(|p| EvalReport::load(p).map(|r| (p.display().to_string(), r)))
        .collect::<Result<_, _>>()?;
    let merged = merge_reports(&reports)?;
    for p in merged.write_all(&a.out)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(mut cli: Cli) -> Result<(), CliError> {
    if cli.jobs > 0 {
        // Fails only if a pool already exists, e.g. when called twice in-process.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            log::debug!("keeping existing thread pool: {e}");
        }
    }
    if cli.cache.is_none() {
        cli.cache = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    }
    let cache = match &cli.cache {
        Some(dir) => TranslationCache::open(dir)?,
        None => TranslationCache::in_memory(),
    };
    let ctx = Context {
        cache: Arc::new(cache),
        seed: cli.seed,
        config: serde_json::to_value(&cli).expect("config serializes"),
    };
    match &cli.command {
        Command::Split(a) => run_split(&ctx, a),
        Command::Cache(CacheCommand::Warm(a)) => run_warm(&ctx, a),
        Command::GenVariants(a) => run_gen_variants(&ctx, a),
        Command::MixCorpus(a) => run_mix_corpus(&ctx, a),
        Command::Perturb(a) => run_perturb(&ctx, a),
        Command::Retrieve(a) => run_retrieve(&ctx, a),
        Command::Eval(a) => run_eval_cmd(&ctx, a),
        Command::Probe(a) => run_probe_cmd(&ctx, a),
        Command::Report(a) => run_report(a),
    }
}

/// Entry point for the binary: parses `std::env::args_os`, runs, and returns
/// the process exit code.
pub fn main() -> i32 {
    main_with(std::env::args_os().collect())
}

pub fn main_with(args: Vec<OsString>) -> i32 {
    let cli = match parse(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .target(env_logger::Target::Stderr)
        .try_init();
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
