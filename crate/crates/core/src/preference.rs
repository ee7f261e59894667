//! DPO pair mining: sample candidates, execute them, and pair every distinct
//! candidate whose result disagrees with gold against the gold SQL.

use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Sample};
use crate::executor::{self, execute, results_match_with, ExecutorError, OutcomeKind, RowSemantics};
use crate::model_client::{ClientError, GenerationRequest, ModelClient};
use crate::schema::{render_prompt, SchemaError};
use crate::sql_analysis::has_order_by;

#[derive(Debug, Error)]
pub enum PreferenceError {
    #[error("gold SQL of sample {sample_id} did not return rows: {message}")]
    GoldExecutionFailed { sample_id: String, message: String },
    #[error("sample {sample_id}: {source}")]
    Client { sample_id: String, source: ClientError },
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error(transparent)]
    Prompt(#[from] SchemaError),
    #[error("sample {sample_id}: {message}")]
    Corpus { sample_id: String, message: String },
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectedReason {
    ResultMismatch,
    ExecError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub rejected_reason: RejectedReason,
    pub sample_id: String,
}

#[derive(Debug, Clone, Copy)]
pub struct MineOptions {
    pub n_candidates: usize,
    pub temperature: f64,
    pub timeout: Duration,
    pub semantics: RowSemantics,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            n_candidates: 8,
            temperature: 0.5,
            timeout: executor::DEFAULT_TIMEOUT,
            semantics: RowSemantics::Multiset,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MineStats {
    pub samples: usize,
    pub pairs: usize,
    /// Samples that yielded no rejected candidate.
    pub skipped_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MineReport {
    pub pairs: Vec<PreferencePair>,
    pub stats: MineStats,
}

pub fn normalize_whitespace(sql: &str) -> String {
    sql.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn mine_pairs(
    sample: &Sample,
    client: &dyn ModelClient,
    n: usize,
    temperature: f64,
    db_path: &Path,
) -> Result<Vec<PreferencePair>, PreferenceError> {
    let opts = MineOptions { n_candidates: n, temperature, ..MineOptions::default() };
    mine_pairs_with(sample, client, db_path, &opts)
}

pub fn mine_pairs_with(
    sample: &Sample,
    client: &dyn ModelClient,
    db_path: &Path,
    opts: &MineOptions,
) -> Result<Vec<PreferencePair>, PreferenceError> {
    let gold = execute(db_path, &sample.gold_sql, opts.timeout)?;
    if gold.kind() != OutcomeKind::Rows {
        return Err(PreferenceError::GoldExecutionFailed {
            sample_id: sample.sample_id.clone(),
            message: gold.error_message().unwrap_or("timeout").to_string(),
        });
    }
    let prompt = render_prompt(&sample.schema_tables, &sample.question)?;
    let request = GenerationRequest::new(prompt.clone()).with_temperature(opts.temperature).with_n(opts.n_candidates);
    let response = client
        .generate(&request)
        .map_err(|source| PreferenceError::Client { sample_id: sample.sample_id.clone(), source })?;

    let order_sensitive = has_order_by(&sample.gold_sql);
    let gold_norm = normalize_whitespace(&sample.gold_sql);
    let mut seen: HashSet<String> = HashSet::new();
    let mut pairs = Vec::new();
    for candidate in response.completions {
        let norm = normalize_whitespace(&candidate);
        if norm.is_empty() || norm == gold_norm || !seen.insert(norm) {
            continue;
        }
        let outcome = execute(db_path, &candidate, opts.timeout)?;
        let reason = match outcome.kind() {
            OutcomeKind::ExecError => RejectedReason::ExecError,
            OutcomeKind::Timeout => RejectedReason::Timeout,
            OutcomeKind::Rows => {
                let matched = results_match_with(&outcome, &gold, order_sensitive, opts.semantics)
                    .expect("gold outcome checked to be rows");
                if matched {
                    continue;
                }
                RejectedReason::ResultMismatch
            }
        };
        pairs.push(PreferencePair {
            prompt: prompt.clone(),
            chosen: sample.gold_sql.clone(),
            rejected: candidate,
            rejected_reason: reason,
            sample_id: sample.sample_id.clone(),
        });
    }
    Ok(pairs)
}

/// Mine every sample on a pool of `jobs` workers; pairs come out in sample
/// order.
pub fn mine_corpus(
    samples: &[Sample],
    corpus: &Corpus,
    client: &dyn ModelClient,
    opts: &MineOptions,
    jobs: usize,
) -> Result<MineReport, PreferenceError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PreferenceError::Pool(e.to_string()))?;
    let per_sample: Vec<Vec<PreferencePair>> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| {
                corpus.schema(&s.db_id).map_err(|e| PreferenceError::Corpus {
                    sample_id: s.sample_id.clone(),
                    message: e.to_string(),
                })?;
                mine_pairs_with(s, client, &corpus.db_path(&s.db_id), opts)
            })
            .collect::<Result<_, _>>()
    })?;
    let stats = MineStats {
        samples: samples.len(),
        pairs: per_sample.iter().map(Vec::len).sum(),
        skipped_samples: per_sample.iter().filter(|p| p.is_empty()).count(),
    };
    Ok(MineReport { pairs: per_sample.into_iter().flatten().collect(), stats })
}
