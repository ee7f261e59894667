//! Read-only query execution with a wall-clock limit, and EX-style result
//! comparison.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rusqlite::ErrorCode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{open_read_only, SchemaError};
use crate::sql_analysis::lexer::{self, TokenKind};
use crate::value::CellValue;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Virtual-machine steps between timeout checks.
const PROGRESS_INTERVAL: i32 = 1_000;

pub type Row = Vec<CellValue>;

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("database file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("not a database: {path}: {message}")]
    NotADatabase { path: PathBuf, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl From<SchemaError> for ExecutorError {
    fn from(e: SchemaError) -> Self {
        match e {
            SchemaError::FileNotFound(p) => ExecutorError::FileNotFound(p),
            SchemaError::NotADatabase { path, message } => ExecutorError::NotADatabase { path, message },
            SchemaError::IoError { path, message } => ExecutorError::Io { path, message },
            SchemaError::EmptySchemaList => unreachable!("not produced when opening a database"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeKind {
    Rows,
    ExecError,
    Timeout,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeKind::Rows => "Rows",
            OutcomeKind::ExecError => "ExecError",
            OutcomeKind::Timeout => "Timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Rows { rows: Vec<Row> },
    ExecError { error_message: String },
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    #[serde(flatten)]
    pub payload: Payload,
    pub elapsed: Duration,
}

impl ExecutionOutcome {
    pub fn rows(rows: Vec<Row>) -> Self {
        ExecutionOutcome { payload: Payload::Rows { rows }, elapsed: Duration::ZERO }
    }

    pub fn error(message: impl Into<String>) -> Self {
        ExecutionOutcome { payload: Payload::ExecError { error_message: message.into() }, elapsed: Duration::ZERO }
    }

    pub fn timeout() -> Self {
        ExecutionOutcome { payload: Payload::Timeout, elapsed: Duration::ZERO }
    }

    pub fn kind(&self) -> OutcomeKind {
        match self.payload {
            Payload::Rows { .. } => OutcomeKind::Rows,
            Payload::ExecError { .. } => OutcomeKind::ExecError,
            Payload::Timeout => OutcomeKind::Timeout,
        }
    }

    pub fn as_rows(&self) -> Option<&[Row]> {
        match &self.payload {
            Payload::Rows { rows } => Some(rows),
            _ => None,
        }
    }

    pub fn error_message(&self) -> Option<&str> {
        match &self.payload {
            Payload::ExecError { error_message } => Some(error_message),
            _ => None,
        }
    }
}

fn has_trailing_statement(sql: &str) -> bool {
    let Ok(tokens) = lexer::tokenize(sql) else {
        return false;
    };
    let mut seen_end = false;
    for t in &tokens {
        match t.kind {
            TokenKind::Semicolon => seen_end = true,
            _ if seen_end => return true,
            _ => {}
        }
    }
    false
}

/// Only plain queries run; `ATTACH`, `PRAGMA` and friends count as read-only
/// to SQLite but are refused here.
fn is_query(sql: &str) -> bool {
    let Ok(tokens) = lexer::tokenize(sql) else {
        return true;
    };
    match tokens.first() {
        Some(t) if t.kind == TokenKind::LParen => true,
        Some(t) => ["select", "with", "values"].iter().any(|kw| t.is_keyword(kw)),
        None => true,
    }
}

/// Run `sql` against the database at `db_path` on a private read-only
/// connection. Statement failures become [`Payload::ExecError`]; exceeding
/// `timeout` becomes [`Payload::Timeout`]. Only opening the file can fail.
pub fn execute(db_path: &Path, sql: &str, timeout: Duration) -> Result<ExecutionOutcome, ExecutorError> {
    let conn = open_read_only(db_path)?;
    let started = Instant::now();
    let finish = |payload: Payload| ExecutionOutcome { payload, elapsed: started.elapsed() };

    if let Err(e) = conn.pragma_update(None, "query_only", true) {
        return Ok(finish(Payload::ExecError { error_message: e.to_string() }));
    }
    conn.progress_handler(PROGRESS_INTERVAL, Some(move || started.elapsed() > timeout));

    let failed = |e: rusqlite::Error| {
        if e.sqlite_error_code() == Some(ErrorCode::OperationInterrupted) {
            Payload::Timeout
        } else {
            Payload::ExecError { error_message: e.to_string() }
        }
    };

    let sql = sql.trim();
    if has_trailing_statement(sql) {
        return Ok(finish(Payload::ExecError { error_message: "multiple statements are not allowed".into() }));
    }
    if !is_query(sql) {
        return Ok(finish(Payload::ExecError { error_message: "only SELECT queries are allowed".into() }));
    }
    let mut stmt = match conn.prepare(sql) {
        Ok(s) => s,
        Err(e) => return Ok(finish(failed(e))),
    };
    if !stmt.readonly() {
        return Ok(finish(Payload::ExecError {
            error_message: "attempt to write a readonly database".into(),
        }));
    }
    let width = stmt.column_count();
    let mut rows_iter = match stmt.query([]) {
        Ok(r) => r,
        Err(e) => return Ok(finish(failed(e))),
    };
    let mut rows = Vec::new();
    loop {
        match rows_iter.next() {
            Ok(Some(row)) => {
                let mut cells = Vec::with_capacity(width);
                for i in 0..width {
                    match row.get_ref(i) {
                        Ok(v) => cells.push(CellValue::from_sqlite(v)),
                        Err(e) => return Ok(finish(failed(e))),
                    }
                }
                rows.push(cells);
            }
            Ok(None) => break,
            Err(e) => return Ok(finish(failed(e))),
        }
        if started.elapsed() > timeout {
            return Ok(finish(Payload::Timeout));
        }
    }
    Ok(finish(Payload::Rows { rows }))
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MatchError {
    #[error("gold query did not produce rows ({kind}): {message}")]
    GoldExecutionFailed { kind: OutcomeKind, message: String },
}

/// How duplicate rows count in order-insensitive comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSemantics {
    #[default]
    Multiset,
    Set,
}

/// EX comparison with multiset semantics.
pub fn results_match(pred: &ExecutionOutcome, gold: &ExecutionOutcome, order_sensitive: bool) -> Result<bool, MatchError> {
    results_match_with(pred, gold, order_sensitive, RowSemantics::Multiset)
}

pub fn results_match_with(
    pred: &ExecutionOutcome,
    gold: &ExecutionOutcome,
    order_sensitive: bool,
    semantics: RowSemantics,
) -> Result<bool, MatchError> {
    let Some(gold_rows) = gold.as_rows() else {
        return Err(MatchError::GoldExecutionFailed {
            kind: gold.kind(),
            message: gold.error_message().unwrap_or("timed out").to_string(),
        });
    };
    let Some(pred_rows) = pred.as_rows() else {
        return Ok(false);
    };
    Ok(rows_match(pred_rows, gold_rows, order_sensitive, semantics))
}

fn row_matches(a: &Row, b: &Row) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.matches(y))
}

fn row_cmp(a: &Row, b: &Row) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn dedup(rows: &[Row]) -> Vec<Row> {
    let mut v = rows.to_vec();
    v.sort_by(row_cmp);
    v.dedup_by(|a, b| row_matches(a, b));
    v
}

pub fn rows_match(pred: &[Row], gold: &[Row], order_sensitive: bool, semantics: RowSemantics) -> bool {
    if order_sensitive {
        return pred.len() == gold.len() && pred.iter().zip(gold).all(|(a, b)| row_matches(a, b));
    }
    match semantics {
        RowSemantics::Multiset => multiset_equal(pred, gold),
        RowSemantics::Set => multiset_equal(&dedup(pred), &dedup(gold)),
    }
}

/// Hashable projection of a cell. Numbers collapse to `Num` when any real
/// is present so that tolerance matching happens within buckets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum BucketCell<'a> {
    Null,
    Int(i64),
    Num,
    Text(&'a str),
    Blob(&'a str),
}

fn bucket_key(row: &Row, fuzzy: bool) -> Vec<BucketCell<'_>> {
    row.iter()
        .map(|c| match c {
            CellValue::Null => BucketCell::Null,
            CellValue::Integer(_) | CellValue::Real(_) if fuzzy => BucketCell::Num,
            CellValue::Integer(i) => BucketCell::Int(*i),
            CellValue::Real(_) => BucketCell::Num,
            CellValue::Text(t) => BucketCell::Text(t),
            CellValue::BlobDigest(d) => BucketCell::Blob(d),
        })
        .collect()
}

fn multiset_equal(pred: &[Row], gold: &[Row]) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    let fuzzy = pred.iter().chain(gold).flatten().any(|c| matches!(c, CellValue::Real(_)));
    let mut buckets: HashMap<Vec<BucketCell<'_>>, (Vec<&Row>, Vec<&Row>)> = HashMap::new();
    for r in pred {
        buckets.entry(bucket_key(r, fuzzy)).or_default().0.push(r);
    }
    for r in gold {
        buckets.entry(bucket_key(r, fuzzy)).or_default().1.push(r);
    }
    buckets.into_values().all(|(mut p, mut g)| {
        if p.len() != g.len() {
            return false;
        }
        if !fuzzy {
            return true;
        }
        // Rows in one bucket differ only in numeric cells.
        p.sort_by(|a, b| row_cmp(a, b));
        g.sort_by(|a, b| row_cmp(a, b));
        p.iter().zip(&g).all(|(a, b)| row_matches(a, b))
    })
}
