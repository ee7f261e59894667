//! Execution accuracy (EX), test-suite accuracy (TS), and corpus reports.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{variant_paths, Corpus, CorpusError, Sample};
use crate::executor::{self, ExecutionOutcome, ExecutorError, OutcomeKind, RowSemantics};
use crate::sql_analysis::{self, ValidityStatus};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold SQL of sample {sample_id} failed on {}: {message}", db_path.display())]
    GoldExecutionFailed { sample_id: String, db_path: PathBuf, message: String },
    #[error("empty variant suite for sample {0}")]
    EmptyVariantSuite(String),
    #[error("corpus layout error: {0}")]
    CorpusLayout(String),
    #[error("prediction for unknown sample id {0}")]
    UnknownSampleId(String),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

impl From<CorpusError> for MetricsError {
    fn from(e: CorpusError) -> Self {
        MetricsError::CorpusLayout(e.to_string())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub timeout: Duration,
    pub semantics: RowSemantics,
    pub parallelism: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { timeout: executor::DEFAULT_TIMEOUT, semantics: RowSemantics::Multiset, parallelism: 1 }
    }
}

/// Why a prediction failed EX.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureClass {
    SyntaxError,
    WrongTableName,
    WrongColumnName,
    MissingQuotation,
    ExecError,
    Timeout,
    ResultMismatch,
    MissingPrediction,
}

impl FailureClass {
    /// Static validity defect as a failure class; `None` for valid SQL.
    pub fn from_validity(status: ValidityStatus) -> Option<Self> {
        match status {
            ValidityStatus::Valid => None,
            ValidityStatus::SyntaxError => Some(FailureClass::SyntaxError),
            ValidityStatus::WrongTableName => Some(FailureClass::WrongTableName),
            ValidityStatus::WrongColumnName => Some(FailureClass::WrongColumnName),
            ValidityStatus::MissingQuotation => Some(FailureClass::MissingQuotation),
            ValidityStatus::ExecError => Some(FailureClass::ExecError),
            ValidityStatus::Timeout => Some(FailureClass::Timeout),
        }
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalVerdict {
    pub sample_id: String,
    pub ex_match: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_match: Option<bool>,
    pub pred_sql: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_class: Option<FailureClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome_kind: Option<OutcomeKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ex_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_accuracy: Option<f64>,
    pub n_samples: usize,
    pub error_histogram: BTreeMap<FailureClass, usize>,
    pub verdicts: Vec<EvalVerdict>,
}

fn gold_outcome(sample: &Sample, db_path: &Path, timeout: Duration) -> Result<ExecutionOutcome, MetricsError> {
    let outcome = executor::execute(db_path, &sample.gold_sql, timeout)?;
    if outcome.kind() != OutcomeKind::Rows {
        return Err(MetricsError::GoldExecutionFailed {
            sample_id: sample.sample_id.clone(),
            db_path: db_path.to_path_buf(),
            message: outcome.error_message().unwrap_or("timed out").to_string(),
        });
    }
    Ok(outcome)
}

fn compare(
    pred: &ExecutionOutcome,
    gold: &ExecutionOutcome,
    order_sensitive: bool,
    semantics: RowSemantics,
) -> bool {
    // Gold is known to be Rows here.
    executor::results_match_with(pred, gold, order_sensitive, semantics).unwrap_or(false)
}

/// EX: the prediction and gold produce matching results on `db_path`.
/// Order matters only when the gold SQL has a top-level `ORDER BY`.
pub fn execution_accuracy(pred_sql: &str, sample: &Sample, db_path: &Path) -> Result<bool, MetricsError> {
    execution_accuracy_with(pred_sql, sample, db_path, &EvalOptions::default())
}

pub fn execution_accuracy_with(
    pred_sql: &str,
    sample: &Sample,
    db_path: &Path,
    opts: &EvalOptions,
) -> Result<bool, MetricsError> {
    let gold = gold_outcome(sample, db_path, opts.timeout)?;
    let pred = executor::execute(db_path, pred_sql, opts.timeout)?;
    Ok(compare(&pred, &gold, sql_analysis::has_order_by(&sample.gold_sql), opts.semantics))
}

/// TS: EX holds on every database of the suite. Stops at the first miss.
pub fn test_suite_accuracy(pred_sql: &str, sample: &Sample, variant_db_paths: &[PathBuf]) -> Result<bool, MetricsError> {
    test_suite_accuracy_with(pred_sql, sample, variant_db_paths, &EvalOptions::default())
}

pub fn test_suite_accuracy_with(
    pred_sql: &str,
    sample: &Sample,
    variant_db_paths: &[PathBuf],
    opts: &EvalOptions,
) -> Result<bool, MetricsError> {
    if variant_db_paths.is_empty() {
        return Err(MetricsError::EmptyVariantSuite(sample.sample_id.clone()));
    }
    for path in variant_db_paths {
        if !execution_accuracy_with(pred_sql, sample, path, opts)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn evaluate_sample(
    sample: &Sample,
    pred_sql: Option<&str>,
    corpus: &Corpus,
    variant_root: Option<&Path>,
    opts: &EvalOptions,
) -> Result<EvalVerdict, MetricsError> {
    let db_path = corpus.db_path(&sample.db_id);
    if !db_path.is_file() {
        return Err(MetricsError::CorpusLayout(format!(
            "database for {} not found at {}",
            sample.sample_id,
            db_path.display()
        )));
    }
    let suite: Option<Vec<PathBuf>> = variant_root
        .map(|root| variant_paths(root, &sample.db_id))
        .filter(|v| !v.is_empty())
        .map(|v| std::iter::once(db_path.clone()).chain(v).collect());

    let gold = gold_outcome(sample, &db_path, opts.timeout)?;
    let Some(pred_sql) = pred_sql else {
        return Ok(EvalVerdict {
            sample_id: sample.sample_id.clone(),
            ex_match: false,
            ts_match: suite.as_ref().map(|_| false),
            pred_sql: String::new(),
            failure_class: Some(FailureClass::MissingPrediction),
            outcome_kind: None,
        });
    };

    let order_sensitive = sql_analysis::has_order_by(&sample.gold_sql);
    let pred = executor::execute(&db_path, pred_sql, opts.timeout)?;
    let ex_match = compare(&pred, &gold, order_sensitive, opts.semantics);

    let ts_match = match &suite {
        None => None,
        Some(_) if !ex_match => Some(false),
        // The base database is the first member and already passed.
        Some(paths) => Some(test_suite_accuracy_with(pred_sql, sample, &paths[1..], opts)?),
    };

    let failure_class = if ex_match {
        None
    } else {
        let static_class = corpus
            .schema(&sample.db_id)
            .ok()
            .and_then(|schema| FailureClass::from_validity(sql_analysis::validate(pred_sql, schema).status));
        Some(static_class.unwrap_or(match pred.kind() {
            OutcomeKind::ExecError => FailureClass::ExecError,
            OutcomeKind::Timeout => FailureClass::Timeout,
            OutcomeKind::Rows => FailureClass::ResultMismatch,
        }))
    };

    Ok(EvalVerdict {
        sample_id: sample.sample_id.clone(),
        ex_match,
        ts_match,
        pred_sql: pred_sql.to_string(),
        failure_class,
        outcome_kind: Some(pred.kind()),
    })
}

/// Evaluate every sample. Samples without a prediction count as failures.
/// The report is sorted by sample id and does not depend on `parallelism`.
pub fn evaluate_corpus(
    predictions: &BTreeMap<String, String>,
    samples: &[Sample],
    corpus: &Corpus,
    variant_root: Option<&Path>,
    opts: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    for id in predictions.keys() {
        if !samples.iter().any(|s| &s.sample_id == id) {
            return Err(MetricsError::UnknownSampleId(id.clone()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .map_err(|e| MetricsError::Pool(e.to_string()))?;
    let mut verdicts: Vec<EvalVerdict> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| evaluate_sample(s, predictions.get(&s.sample_id).map(String::as_str), corpus, variant_root, opts))
            .collect::<Result<_, _>>()
    })?;
    verdicts.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(build_report(verdicts))
}

pub fn build_report(verdicts: Vec<EvalVerdict>) -> EvalReport {
    let n = verdicts.len();
    let ex_hits = verdicts.iter().filter(|v| v.ex_match).count();
    let ts: Vec<bool> = verdicts.iter().filter_map(|v| v.ts_match).collect();
    let ts_accuracy = (!ts.is_empty()).then(|| ts.iter().filter(|&&b| b).count() as f64 / ts.len() as f64);
    let mut error_histogram = BTreeMap::new();
    for v in verdicts.iter().filter(|v| !v.ex_match) {
        if let Some(class) = v.failure_class {
            *error_histogram.entry(class).or_insert(0) += 1;
        }
    }
    EvalReport {
        ex_accuracy: if n == 0 { 0.0 } else { ex_hits as f64 / n as f64 },
        ts_accuracy,
        n_samples: n,
        error_histogram,
        verdicts,
    }
}

/// Plain-text summary with `Model | EX | TS` columns, scores in percent.
pub fn render_summary(report: &EvalReport, label: &str) -> String {
    let width = label.len().max("Model".len());
    let ts = report.ts_accuracy.map(|t| format!("{:.1}", t * 100.0)).unwrap_or_else(|| "-".into());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>5}  {:>5}", "Model", "EX", "TS");
    let _ = writeln!(out, "{}  {}  {}", "-".repeat(width), "-".repeat(5), "-".repeat(5));
    let _ = writeln!(out, "{:<width$}  {:>5.1}  {:>5}", label, report.ex_accuracy * 100.0, ts);
    let _ = writeln!(out, "\nsamples: {}", report.n_samples);
    if !report.error_histogram.is_empty() {
        let _ = writeln!(out, "failures:");
        for (class, count) in &report.error_histogram {
            let _ = writeln!(out, "  {class:<18} {count}");
        }
    }
    out
}
