//! SQL parsing, reference extraction, and schema validity checks.
//!
//! Validity defects are classified as syntax errors, wrong table names,
//! wrong column names, or missing quotation around identifiers with special
//! characters. Exactly one status is reported, in that priority order.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod quotation;
pub mod references;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::DatabaseSchema;
pub use parser::parse_query;
pub use quotation::SpecialChars;
pub use references::{ReferenceProblem, Resolution, SqlReferences, UNRESOLVED};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub message: String,
    /// Byte offset into the SQL text.
    pub position: Option<usize>,
}

impl ParseError {
    pub fn new(message: impl Into<String>, position: usize) -> Self {
        ParseError { message: message.into(), position: Some(position) }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{} at position {p}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidityStatus {
    Valid,
    SyntaxError,
    WrongTableName,
    WrongColumnName,
    MissingQuotation,
    /// Statically valid but rejected by the engine; only set by runtime checks.
    ExecError,
    /// Statically valid but exceeded the execution budget; only set by runtime checks.
    Timeout,
}

impl ValidityStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValidityStatus::Valid => "Valid",
            ValidityStatus::SyntaxError => "SyntaxError",
            ValidityStatus::WrongTableName => "WrongTableName",
            ValidityStatus::WrongColumnName => "WrongColumnName",
            ValidityStatus::MissingQuotation => "MissingQuotation",
            ValidityStatus::ExecError => "ExecError",
            ValidityStatus::Timeout => "Timeout",
        }
    }
}

impl fmt::Display for ValidityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub status: ValidityStatus,
    pub detail: String,
}

impl ValidityReport {
    pub fn valid() -> Self {
        ValidityReport { status: ValidityStatus::Valid, detail: String::new() }
    }

    pub fn new(status: ValidityStatus, detail: impl Into<String>) -> Self {
        let detail = if status == ValidityStatus::Valid { String::new() } else { detail.into() };
        ValidityReport { status, detail }
    }

    pub fn is_valid(&self) -> bool {
        self.status == ValidityStatus::Valid
    }
}

/// Tables and columns referenced by `sql`, without a schema.
pub fn extract_references(sql: &str) -> Result<SqlReferences, ParseError> {
    let query = parse_query(sql)?;
    Ok(references::resolve(&query, None).references)
}

/// References resolved against `schema`, together with anything unresolvable.
pub fn resolve_against(sql: &str, schema: &DatabaseSchema) -> Result<Resolution, ParseError> {
    let query = parse_query(sql)?;
    Ok(references::resolve(&query, Some(schema)))
}

/// Whether the statement has a top-level `ORDER BY`. Falls back to a token
/// scan when the statement is outside the parser's subset.
pub fn has_order_by(sql: &str) -> bool {
    match extract_references(sql) {
        Ok(refs) => refs.has_order_by,
        Err(_) => lexer::tokenize(sql)
            .map(|t| lexer::has_top_level_order_by(&t))
            .unwrap_or(false),
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationOptions {
    pub special_chars: SpecialChars,
}

pub fn validate(sql: &str, schema: &DatabaseSchema) -> ValidityReport {
    validate_with(sql, schema, &ValidationOptions::default())
}

/// Static validity check against `schema`.
///
/// Bare identifiers that need quoting are repaired (quoted) before table and
/// column checks run, so `SELECT free text FROM stops` is a quotation defect
/// rather than an unknown column `free`.
pub fn validate_with(sql: &str, schema: &DatabaseSchema, opts: &ValidationOptions) -> ValidityReport {
    let mut unquoted = quotation::find_unquoted(sql, schema, &opts.special_chars);
    let original = parse_query(sql);
    let repaired = (!unquoted.is_empty()).then(|| parse_query(&quotation::apply_quotes(sql, &unquoted)));
    let query = match (original, repaired) {
        (_, Some(Ok(q))) => q,
        (Ok(q), _) => {
            unquoted.clear();
            q
        }
        (Err(e), _) => return ValidityReport::new(ValidityStatus::SyntaxError, e.to_string()),
    };

    let resolution = references::resolve(&query, Some(schema));
    let table_problem = resolution.problems.iter().find_map(|p| match p {
        ReferenceProblem::UnknownTable(t) => Some(format!("no such table: {t}")),
        ReferenceProblem::UnknownQualifier { qualifier, column } => {
            Some(format!("no such table or alias: {qualifier} (in {qualifier}.{column})"))
        }
        ReferenceProblem::UnknownColumn { .. } => None,
    });
    if let Some(detail) = table_problem {
        return ValidityReport::new(ValidityStatus::WrongTableName, detail);
    }
    let column_problem = resolution.problems.iter().find_map(|p| match p {
        ReferenceProblem::UnknownColumn { column, tables } if tables.is_empty() => {
            Some(format!("{column} not in any table"))
        }
        ReferenceProblem::UnknownColumn { column, tables } => Some(format!("{column} not in {}", tables.join(", "))),
        _ => None,
    });
    if let Some(detail) = column_problem {
        return ValidityReport::new(ValidityStatus::WrongColumnName, detail);
    }
    if !unquoted.is_empty() {
        let mut names: Vec<String> = unquoted.iter().map(|u| format!("\"{}\"", u.name)).collect();
        names.sort();
        names.dedup();
        return ValidityReport::new(
            ValidityStatus::MissingQuotation,
            format!("{} must be quoted (contains special characters)", names.join(", ")),
        );
    }
    ValidityReport::valid()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ColumnSchema, TableSchema};
    use std::collections::BTreeSet;

    fn table(name: &str, cols: &[&str]) -> TableSchema {
        TableSchema { name: name.into(), columns: cols.iter().map(|c| ColumnSchema::new(*c)).collect() }
    }

    fn soccer() -> DatabaseSchema {
        DatabaseSchema {
            db_id: "soccer_2".into(),
            file_path: "soccer_2.sqlite".into(),
            tables: vec![
                table("tryout", &["pid", "cname", "decision", "ppos"]),
                table("player", &["hs", "pname", "ycard", "pid"]),
                table("college", &["cname", "enr", "state"]),
            ],
            foreign_keys: vec![],
        }
    }

    fn pairs(items: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        items.iter().map(|(t, c)| (t.to_string(), c.to_string())).collect()
    }

    #[test]
    fn chosen_query_references() {
        let refs = extract_references(
            "SELECT min(player.hs), tryout.ppos FROM tryout JOIN player ON tryout.pid = player.pid GROUP BY tryout.ppos",
        )
        .unwrap();
        assert_eq!(refs.tables, ["player", "tryout"].iter().map(|s| s.to_string()).collect());
        assert_eq!(
            refs.columns,
            pairs(&[("player", "hs"), ("tryout", "ppos"), ("tryout", "pid"), ("player", "pid")])
        );
        assert!(!refs.has_order_by);
    }

    #[test]
    fn trivial_and_count_star() {
        let refs = extract_references("SELECT 1").unwrap();
        assert!(refs.tables.is_empty() && refs.columns.is_empty());
        let refs = extract_references("SELECT count(*) FROM singer").unwrap();
        assert_eq!(refs.tables.len(), 1);
        assert!(refs.columns.is_empty());
    }

    #[test]
    fn aliases_and_ambiguity() {
        let refs = extract_references(
            "SELECT T1.name, age FROM singer AS T1 JOIN concert T2 ON T1.id = T2.sid ORDER BY T1.age",
        )
        .unwrap();
        assert!(refs.has_order_by);
        assert_eq!(
            refs.columns,
            pairs(&[("singer", "name"), ("singer", "id"), ("concert", "sid"), ("singer", "age"), (UNRESOLVED, "age")])
        );
        for (t, _) in &refs.columns {
            assert!(t == UNRESOLVED || refs.tables.contains(t));
        }
    }

    #[test]
    fn correlated_subquery_resolves_innermost_first() {
        let refs = extract_references(
            "SELECT name FROM a WHERE EXISTS (SELECT 1 FROM b WHERE b.x = a.x AND y > 0)",
        )
        .unwrap();
        assert_eq!(refs.columns, pairs(&[("a", "name"), ("b", "x"), ("a", "x"), ("b", "y")]));
    }

    #[test]
    fn projection_alias_not_a_column() {
        let refs = extract_references("SELECT count(*) AS cnt FROM t GROUP BY k ORDER BY cnt DESC").unwrap();
        assert_eq!(refs.columns, pairs(&[("t", "k")]));
    }

    #[test]
    fn rejected_sample_is_wrong_column() {
        let report = validate("SELECT min(HS) ,  ppos FROM player GROUP BY ppos", &soccer());
        assert_eq!(report.status, ValidityStatus::WrongColumnName);
        assert_eq!(report.detail, "ppos not in player");
    }

    #[test]
    fn chosen_sample_is_valid() {
        let report = validate(
            "SELECT min(player.hs) ,   tryout.ppos FROM tryout JOIN player ON tryout.pid  =  player.pid GROUP BY tryout.ppos",
            &soccer(),
        );
        assert_eq!(report, ValidityReport::valid());
    }

    #[test]
    fn priority_order() {
        let s = soccer();
        assert_eq!(validate("SELECT FROM", &s).status, ValidityStatus::SyntaxError);
        assert_eq!(validate("SELECT nope FROM players", &s).status, ValidityStatus::WrongTableName);
        assert_eq!(validate("SELECT T9.hs FROM player AS T1", &s).status, ValidityStatus::WrongTableName);
        assert_eq!(validate("SELECT nope FROM player", &s).status, ValidityStatus::WrongColumnName);
        assert_eq!(validate("SELECT pname FROM player WHERE pname = \"Andrew\"", &s).status, ValidityStatus::Valid);
        assert_eq!(validate("SELECT T1.hs FROM player AS T1 WHERE T1.cname = 'x'", &s).detail, "cname not in player");
    }

    #[test]
    fn missing_quotation_beats_unknown_fragment() {
        let mut s = soccer();
        s.tables.push(table("stops", &["stop_id", "free text", "route/line"]));
        let r = validate("SELECT free text FROM stops", &s);
        assert_eq!(r.status, ValidityStatus::MissingQuotation);
        assert!(r.detail.contains("free text"));
        let r = validate("SELECT count(*) FROM stops WHERE route/line = 'A1'", &s);
        assert_eq!(r.status, ValidityStatus::MissingQuotation);
        // A wrong table elsewhere still outranks quotation.
        let r = validate("SELECT free text FROM stopz", &s);
        assert_eq!(r.status, ValidityStatus::WrongTableName);
        assert_eq!(validate("SELECT \"free text\" FROM stops", &s), ValidityReport::valid());
    }

    #[test]
    fn report_invariant_valid_has_empty_detail() {
        assert!(ValidityReport::new(ValidityStatus::Valid, "ignored").detail.is_empty());
    }

    #[test]
    fn order_by_fallback_for_unparsed_sql() {
        assert!(has_order_by("SELECT a FROM t ORDER BY a"));
        assert!(has_order_by("SELECT a FROM t WHERE a MATCH2 b ORDER BY a"));
        assert!(!has_order_by("SELECT a FROM (SELECT a FROM t ORDER BY a)"));
    }
}
