use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use serde_json::json;
use sqlforge_core::augmentation::{augment_corpus, AugmentConfig, AugmentMode};
use sqlforge_core::corpus::{read_jsonl, write_jsonl, Corpus, Prediction, Sample};
use sqlforge_core::executor::RowSemantics;
use sqlforge_core::metrics::{evaluate_corpus, render_summary, EvalOptions};
use sqlforge_core::model_client::{open_endpoint, HttpConfig, ModelClient};
use sqlforge_core::preference::{mine_corpus, MineOptions};
use sqlforge_core::refine::{refine_corpus, RefineOptions, DEFAULT_MAX_ITERS};
use sqlforge_core::schema::introspect_database;
use sqlforge_core::{executor, schema};

use crate::config::{check_temperature, default_jobs, EndpointConfig, FileConfig};
use crate::{AugmentArgs, Cli, Command, EvalArgs, Failure, IntrospectArgs, MineArgs, ModeArg, RefineArgs};

/// Settings shared by every subcommand after merging flags over the file.
struct Common {
    json: bool,
    jobs: usize,
    seed: u64,
    timeout: Duration,
}

pub fn run(cli: Cli, file: FileConfig) -> Result<(), Failure> {
    let common = Common {
        json: cli.json,
        jobs: cli.jobs.map(usize::from).or(file.jobs).unwrap_or_else(default_jobs),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        timeout: Duration::from_secs(
            cli.exec_timeout_secs.or(file.exec_timeout_secs).unwrap_or(executor::DEFAULT_TIMEOUT.as_secs()),
        ),
    };
    match cli.command {
        Command::Introspect(args) => introspect(args, &file, &common),
        Command::Augment(args) => augment(args, &file, &common),
        Command::Mine(args) => mine(args, &file, &common),
        Command::Refine(args) => refine(args, &file, &common),
        Command::Eval(args) => eval(args, &file, &common),
    }
}

fn corpus_root(flag: Option<PathBuf>, file: &FileConfig) -> Result<PathBuf, Failure> {
    flag.or_else(|| file.corpus_root.clone())
        .ok_or_else(|| Failure::Usage("--corpus is required (or set corpus_root in the config)".into()))
}

fn open_corpus(root: &Path) -> Result<Corpus, Failure> {
    Ok(Corpus::open(root).with_context(|| format!("opening corpus {}", root.display()))?)
}

fn load_samples(corpus: &Corpus, path: &Path) -> Result<Vec<Sample>, Failure> {
    Ok(corpus.load_samples(path).with_context(|| format!("loading samples {}", path.display()))?)
}

fn emit(common: &Common, summary: serde_json::Value, text: String) {
    if common.json {
        println!("{summary}");
    } else {
        print!("{text}");
    }
}

fn client_from(
    flag: Option<String>,
    section: Option<&EndpointConfig>,
    what: &str,
) -> Result<Box<dyn ModelClient>, Failure> {
    let section = section.cloned().unwrap_or_default();
    let spec = flag
        .or_else(|| section.url.clone())
        .ok_or_else(|| Failure::Usage(format!("no {what} endpoint given")))?;
    let http: HttpConfig = section.http_config();
    open_endpoint(&spec, &http).map_err(|e| Failure::Usage(format!("{what} endpoint: {e}")))
}

fn introspect(args: IntrospectArgs, file: &FileConfig, common: &Common) -> Result<(), Failure> {
    let root = corpus_root(args.corpus, file)?;
    let mut schemas = if args.dbs.is_empty() {
        schema::load_corpus(&root, args.sample_values).context("introspecting corpus")?
    } else {
        let mut out = Vec::new();
        for db in &args.dbs {
            let path = schema::database_path(&root, db);
            out.push(introspect_database(&path, db, args.sample_values).with_context(|| format!("introspecting {db}"))?);
        }
        out
    };
    schemas.sort_by(|a, b| a.db_id.cmp(&b.db_id));
    match &args.out {
        Some(out) => write_jsonl(out, &schemas).context("writing schemas")?,
        None => {
            for s in &schemas {
                println!("{}", serde_json::to_string(s).context("serializing schema")?);
            }
        }
    }
    if args.out.is_some() {
        let tables: usize = schemas.iter().map(|s| s.tables.len()).sum();
        emit(
            common,
            json!({"command": "introspect", "databases": schemas.len(), "tables": tables}),
            format!("introspected {} databases, {tables} tables\n", schemas.len()),
        );
    }
    Ok(())
}

fn augment(args: AugmentArgs, file: &FileConfig, common: &Common) -> Result<(), Failure> {
    let corpus = open_corpus(&corpus_root(args.corpus, file)?)?;
    let samples = load_samples(&corpus, &args.samples)?;
    let mode = match args.mode {
        ModeArg::CrossDb => AugmentMode::CrossDb,
        ModeArg::InnerDb => AugmentMode::InnerDb,
    };
    let records = augment_corpus(&samples, &corpus, mode, common.seed, &AugmentConfig::default()).context("augmenting")?;
    write_jsonl(&args.out, &records).context("writing augmented samples")?;
    let unchanged = records
        .iter()
        .filter(|r| matches!(r.provenance, sqlforge_core::augmentation::Provenance::Unchanged { .. }))
        .count();
    emit(
        common,
        json!({"command": "augment", "records": records.len(), "unchanged": unchanged, "seed": common.seed}),
        format!("wrote {} records to {} ({unchanged} unchanged)\n", records.len(), args.out.display()),
    );
    Ok(())
}

fn mine(args: MineArgs, file: &FileConfig, common: &Common) -> Result<(), Failure> {
    let temperature = args.temperature.or(file.temperature).unwrap_or(0.5);
    check_temperature(temperature).map_err(Failure::Usage)?;
    let flag = match (args.endpoint, args.mock) {
        (Some(url), _) => Some(url),
        (None, Some(mock)) => Some(format!("mock:{}", mock.display())),
        (None, None) => None,
    };
    let client = client_from(flag, file.endpoint.as_ref(), "model")?;
    let corpus = open_corpus(&corpus_root(args.corpus, file)?)?;
    let samples = load_samples(&corpus, &args.samples)?;
    let opts = MineOptions {
        n_candidates: args.n_candidates.map(|n| n as usize).or(file.n_candidates).unwrap_or(8),
        temperature,
        timeout: common.timeout,
        semantics: RowSemantics::Multiset,
    };
    let report = mine_corpus(&samples, &corpus, client.as_ref(), &opts, common.jobs).context("mining pairs")?;
    write_jsonl(&args.out, &report.pairs).context("writing pairs")?;
    let s = &report.stats;
    emit(
        common,
        json!({"command": "mine", "samples": s.samples, "pairs": s.pairs, "skipped_samples": s.skipped_samples}),
        format!("samples: {}\npairs: {}\nskipped samples: {}\n", s.samples, s.pairs, s.skipped_samples),
    );
    Ok(())
}

fn refine(args: RefineArgs, file: &FileConfig, common: &Common) -> Result<(), Failure> {
    let generator = client_from(args.generator, file.generator.as_ref(), "generator")?;
    let debugger = client_from(args.debugger, file.debugger.as_ref(), "debugger")?;
    let corpus = open_corpus(&corpus_root(args.corpus, file)?)?;
    let samples = load_samples(&corpus, &args.samples)?;
    let opts = RefineOptions {
        max_iters: args.max_iters.map(|n| n as usize).or(file.max_iters).unwrap_or(DEFAULT_MAX_ITERS),
        timeout: common.timeout,
        temperature: 0.0,
    };
    let report = refine_corpus(&samples, &corpus, generator.as_ref(), debugger.as_ref(), &opts, common.jobs)
        .context("refining")?;
    write_jsonl(&args.out, &report.predictions).context("writing predictions")?;
    if let Some(dir) = &args.trace {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for trace in &report.traces {
            let path = dir.join(format!("{}.json", trace.sample_id));
            let text = serde_json::to_string_pretty(trace).context("serializing trace")?;
            fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let succeeded = report.traces.iter().filter(|t| t.result.succeeded).count();
    let debugged = report.traces.iter().filter(|t| t.result.iterations_used > 1).count();
    emit(
        common,
        json!({"command": "refine", "samples": report.traces.len(), "succeeded": succeeded, "debugged": debugged}),
        format!(
            "samples: {}\npassed check: {succeeded}\nsent to debugger: {debugged}\n",
            report.traces.len()
        ),
    );
    Ok(())
}

fn eval(args: EvalArgs, file: &FileConfig, common: &Common) -> Result<(), Failure> {
    let corpus = open_corpus(&corpus_root(args.corpus, file)?)?;
    let samples = load_samples(&corpus, &args.samples)?;
    let preds: Vec<Prediction> =
        read_jsonl(&args.preds).with_context(|| format!("loading predictions {}", args.preds.display()))?;
    let mut by_id = BTreeMap::new();
    for p in preds {
        if by_id.insert(p.sample_id.clone(), p.sql).is_some() {
            return Err(Failure::Pipeline(anyhow::anyhow!("duplicate prediction for sample {}", p.sample_id)));
        }
    }
    let variants = args.variants.or_else(|| file.variant_root.clone());
    let opts = EvalOptions {
        timeout: common.timeout,
        semantics: if args.set_semantics { RowSemantics::Set } else { RowSemantics::Multiset },
        parallelism: common.jobs,
    };
    let report = evaluate_corpus(&by_id, &samples, &corpus, variants.as_deref(), &opts).context("evaluating")?;
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&report).context("serializing report")?;
        fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    emit(
        common,
        json!({
            "command": "eval",
            "label": args.label,
            "n_samples": report.n_samples,
            "ex_accuracy": report.ex_accuracy,
            "ts_accuracy": report.ts_accuracy,
            "error_histogram": report.error_histogram,
        }),
        render_summary(&report, &args.label),
    );
    Ok(())
}
