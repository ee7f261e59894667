//! Generate, check, debug, repeat.
//!
//! The generator answers the schema prompt once. Every attempt goes through
//! [`invalid_check`]; a failing attempt is sent to the debugger together
//! with the error, until an attempt passes or the iteration budget runs out.

use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Prediction, Sample};
use crate::executor::{self, execute, ExecutionOutcome, OutcomeKind};
use crate::model_client::{ClientError, GenerationRequest, ModelClient};
use crate::schema::{render_prompt, render_schema_block, DatabaseSchema, PromptStyle, SchemaError, TableSchema};
use crate::sql_analysis::{validate, ValidityReport, ValidityStatus};

pub const DEFAULT_MAX_ITERS: usize = 3;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("max_iters must be at least 1")]
    InvalidBudget,
    #[error("generation failed after {} attempt(s): {source}", attempts.len())]
    Client { source: ClientError, attempts: Vec<RefineAttempt> },
    #[error(transparent)]
    Prompt(#[from] SchemaError),
    #[error("sample {sample_id}: {message}")]
    Corpus { sample_id: String, message: String },
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Generator,
    Debugger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineAttempt {
    pub iteration: usize,
    pub role: Role,
    pub sql: String,
    pub validity: ValidityReport,
    /// `None` when the static check already failed.
    pub outcome: Option<ExecutionOutcome>,
}

impl RefineAttempt {
    pub fn passed(&self) -> bool {
        self.validity.is_valid() && self.outcome.as_ref().is_some_and(|o| o.kind() == OutcomeKind::Rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub final_sql: String,
    pub attempts: Vec<RefineAttempt>,
    pub succeeded: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub max_iters: usize,
    pub timeout: Duration,
    pub temperature: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { max_iters: DEFAULT_MAX_ITERS, timeout: executor::DEFAULT_TIMEOUT, temperature: 0.0 }
    }
}

/// Static validation, then execution. Runtime errors and timeouts turn a
/// statically valid query invalid, with the engine message as detail.
/// Empty results are valid.
pub fn invalid_check(
    sql: &str,
    schema: &DatabaseSchema,
    db_path: &Path,
    timeout: Duration,
) -> (ValidityReport, Option<ExecutionOutcome>) {
    let report = validate(sql, schema);
    if !report.is_valid() {
        return (report, None);
    }
    let outcome = match execute(db_path, sql, timeout) {
        Ok(o) => o,
        Err(e) => ExecutionOutcome::error(e.to_string()),
    };
    let report = match outcome.kind() {
        OutcomeKind::Rows => report,
        OutcomeKind::ExecError => {
            ValidityReport::new(ValidityStatus::ExecError, outcome.error_message().unwrap_or_default())
        }
        OutcomeKind::Timeout => ValidityReport::new(
            ValidityStatus::Timeout,
            format!("execution exceeded {:.1}s", timeout.as_secs_f64()),
        ),
    };
    (report, Some(outcome))
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Prompt for the debugger: schema, question, the failed SQL verbatim, and
/// the check's verdict.
pub fn build_debug_prompt(
    question: &str,
    schema_tables: &[TableSchema],
    failed_sql: &str,
    validity: &ValidityReport,
) -> String {
    format!(
        "{}-- The SQLite query below was written for this question but failed the check.\n\
         -- Question: {}\n\
         {}\n\
         -- Error ({}): {}\n\
         -- Reply with a single corrected SQLite statement and nothing else.",
        render_schema_block(schema_tables, PromptStyle::NamesOnly),
        one_line(question),
        failed_sql.trim(),
        validity.status,
        one_line(&validity.detail),
    )
}

fn ask(client: &dyn ModelClient, prompt: String, temperature: f64) -> Result<String, ClientError> {
    let request = GenerationRequest::new(prompt).with_temperature(temperature);
    let mut response = client.generate(&request)?;
    Ok(response.completions.swap_remove(0))
}

/// Answer `question` over the full schema of `db`.
pub fn parse_question(
    question: &str,
    db: &DatabaseSchema,
    generator: &dyn ModelClient,
    debugger: &dyn ModelClient,
    db_path: &Path,
    max_iters: usize,
) -> Result<RefineResult, RefineError> {
    let opts = RefineOptions { max_iters, ..RefineOptions::default() };
    parse_question_with(question, &db.tables, db, generator, debugger, db_path, &opts)
}

/// Like [`parse_question`], prompting with `schema_tables` instead of the
/// full schema. Validation always uses `db`.
pub fn parse_question_with(
    question: &str,
    schema_tables: &[TableSchema],
    db: &DatabaseSchema,
    generator: &dyn ModelClient,
    debugger: &dyn ModelClient,
    db_path: &Path,
    opts: &RefineOptions,
) -> Result<RefineResult, RefineError> {
    if opts.max_iters == 0 {
        return Err(RefineError::InvalidBudget);
    }
    let mut attempts: Vec<RefineAttempt> = Vec::with_capacity(opts.max_iters);
    for iteration in 0..opts.max_iters {
        let (role, generated) = match attempts.last() {
            None => (Role::Generator, ask(generator, render_prompt(schema_tables, question)?, opts.temperature)),
            Some(prev) => {
                let prompt = build_debug_prompt(question, schema_tables, &prev.sql, &prev.validity);
                (Role::Debugger, ask(debugger, prompt, opts.temperature))
            }
        };
        let sql = match generated {
            Ok(sql) => sql,
            Err(source) => return Err(RefineError::Client { source, attempts }),
        };
        let (validity, outcome) = invalid_check(&sql, db, db_path, opts.timeout);
        tracing::debug!(iteration, ?role, status = %validity.status, "refine attempt");
        attempts.push(RefineAttempt { iteration, role, sql, validity, outcome });
        if attempts.last().is_some_and(RefineAttempt::passed) {
            break;
        }
    }
    let last = attempts.last().expect("at least one attempt");
    Ok(RefineResult {
        final_sql: last.sql.clone(),
        succeeded: last.passed(),
        iterations_used: last.iteration + 1,
        attempts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub sample_id: String,
    #[serde(flatten)]
    pub result: RefineResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub predictions: Vec<Prediction>,
    pub traces: Vec<SampleTrace>,
}

/// Refine every sample on a pool of `jobs` workers, in sample order.
pub fn refine_corpus(
    samples: &[Sample],
    corpus: &Corpus,
    generator: &dyn ModelClient,
    debugger: &dyn ModelClient,
    opts: &RefineOptions,
    jobs: usize,
) -> Result<RefineReport, RefineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RefineError::Pool(e.to_string()))?;
    let traces: Vec<SampleTrace> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| {
                let db = corpus.schema(&s.db_id).map_err(|e| RefineError::Corpus {
                    sample_id: s.sample_id.clone(),
                    message: e.to_string(),
                })?;
                let tables = if s.schema_tables.is_empty() { &db.tables } else { &s.schema_tables };
                let result =
                    parse_question_with(&s.question, tables, db, generator, debugger, &corpus.db_path(&s.db_id), opts)?;
                Ok(SampleTrace { sample_id: s.sample_id.clone(), result })
            })
            .collect::<Result<_, RefineError>>()
    })?;
    let predictions = traces
        .iter()
        .map(|t| Prediction { sample_id: t.sample_id.clone(), sql: t.result.final_sql.clone() })
        .collect();
    Ok(RefineReport { predictions, traces })
}
