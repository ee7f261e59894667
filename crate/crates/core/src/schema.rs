//! Schema catalog: introspect SQLite database files and render them as
//! `CREATE TABLE` prompt text.

use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::{Connection, ErrorCode, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::CellValue;

/// Instruction line placed between the schema block and the question.
pub const PROMPT_INSTRUCTION: &str =
    "-- Using valid SQLite, answer the following questions for the tables provided above.";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("database file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("not a database: {path}: {message}")]
    NotADatabase { path: PathBuf, message: String },
    #[error("i/o error on {path}: {message}")]
    IoError { path: PathBuf, message: String },
    #[error("cannot render a prompt from an empty schema list")]
    EmptySchemaList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(default)]
    pub declared_type: String,
    #[serde(default)]
    pub is_primary_key: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_values: Vec<CellValue>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            declared_type: String::new(),
            is_primary_key: false,
            sample_values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
}

impl TableSchema {
    /// Case-insensitive column lookup.
    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    pub fn primary_key(&self) -> impl Iterator<Item = &ColumnSchema> {
        self.columns.iter().filter(|c| c.is_primary_key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub file_path: PathBuf,
    pub tables: Vec<TableSchema>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl DatabaseSchema {
    /// Case-insensitive table lookup.
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn has_table(&self, name: &str) -> bool {
        self.table(name).is_some()
    }

    /// Names of every column taking part in a primary or foreign key of one
    /// of `tables`.
    pub fn key_columns_of(&self, tables: &[TableSchema]) -> Vec<String> {
        let mut keys: Vec<String> = Vec::new();
        let mut push = |name: &str| {
            if !keys.iter().any(|k| k.eq_ignore_ascii_case(name)) {
                keys.push(name.to_string());
            }
        };
        for table in tables {
            for col in table.primary_key() {
                push(&col.name);
            }
            for fk in &self.foreign_keys {
                if fk.from_table.eq_ignore_ascii_case(&table.name) || fk.to_table.eq_ignore_ascii_case(&table.name) {
                    push(&fk.from_column);
                    push(&fk.to_column);
                }
            }
        }
        keys
    }
}

/// `<root>/database/<db_id>/<db_id>.sqlite`
pub fn database_path(corpus_root: &Path, db_id: &str) -> PathBuf {
    corpus_root
        .join("database")
        .join(db_id)
        .join(format!("{db_id}.sqlite"))
}

pub(crate) fn open_read_only(path: &Path) -> Result<Connection, SchemaError> {
    if !path.is_file() {
        return Err(SchemaError::FileNotFound(path.to_path_buf()));
    }
    let flags = OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX;
    let conn = Connection::open_with_flags(path, flags).map_err(|e| classify(path, e))?;
    // The header is only checked on first read.
    conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
        .map_err(|e| classify(path, e))?;
    Ok(conn)
}

pub(crate) fn classify(path: &Path, err: rusqlite::Error) -> SchemaError {
    match err.sqlite_error_code() {
        Some(ErrorCode::NotADatabase) => SchemaError::NotADatabase {
            path: path.to_path_buf(),
            message: err.to_string(),
        },
        _ => SchemaError::IoError {
            path: path.to_path_buf(),
            message: err.to_string(),
        },
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// Read the catalog of the database at `path`.
///
/// Tables appear in creation order and columns in physical order. When
/// `sample_value_count` is non-zero each column carries up to that many
/// distinct non-null values, in storage order.
pub fn introspect_database(
    path: &Path,
    db_id: &str,
    sample_value_count: usize,
) -> Result<DatabaseSchema, SchemaError> {
    let conn = open_read_only(path)?;
    let err = |e: rusqlite::Error| classify(path, e);

    let mut stmt = conn
        .prepare(
            "SELECT name FROM sqlite_master WHERE type = 'table' \
             AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY rowid",
        )
        .map_err(err)?;
    let names: Vec<String> = stmt
        .query_map([], |r| r.get(0))
        .map_err(err)?
        .collect::<Result<_, _>>()
        .map_err(err)?;

    let mut tables = Vec::with_capacity(names.len());
    for name in &names {
        let mut info = conn
            .prepare(&format!("PRAGMA table_info({})", quote_ident(name)))
            .map_err(err)?;
        let mut columns: Vec<ColumnSchema> = info
            .query_map([], |r| {
                Ok(ColumnSchema {
                    name: r.get(1)?,
                    declared_type: r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                    is_primary_key: r.get::<_, i64>(5)? > 0,
                    sample_values: Vec::new(),
                })
            })
            .map_err(err)?
            .collect::<Result<_, _>>()
            .map_err(err)?;
        if sample_value_count > 0 {
            for col in &mut columns {
                let sql = format!(
                    "SELECT DISTINCT {c} FROM {t} WHERE {c} IS NOT NULL LIMIT {n}",
                    c = quote_ident(&col.name),
                    t = quote_ident(name),
                    n = sample_value_count
                );
                let mut q = conn.prepare(&sql).map_err(err)?;
                let mut rows = q.query([]).map_err(err)?;
                while let Some(row) = rows.next().map_err(err)? {
                    col.sample_values.push(CellValue::from_sqlite(row.get_ref(0).map_err(err)?));
                }
            }
        }
        tables.push(TableSchema { name: name.clone(), columns });
    }

    let mut foreign_keys = Vec::new();
    for table in &tables {
        let mut fk = conn
            .prepare(&format!("PRAGMA foreign_key_list({})", quote_ident(&table.name)))
            .map_err(err)?;
        // (id, seq, target table, from column, to column)
        let raw: Vec<(i64, i64, String, String, Option<String>)> = fk
            .query_map([], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?)))
            .map_err(err)?
            .collect::<Result<_, _>>()
            .map_err(err)?;
        for (_, seq, target, from, to) in raw {
            let Some(target_table) = tables.iter().find(|t| t.name.eq_ignore_ascii_case(&target))
            else {
                tracing::warn!(db_id, table = %table.name, %target, "foreign key to unknown table dropped");
                continue;
            };
            let to_column = match to {
                Some(c) => target_table.column(&c).map(|c| c.name.clone()),
                // `REFERENCES t` without a column list targets t's primary key.
                None => target_table
                    .primary_key()
                    .nth(seq as usize)
                    .map(|c| c.name.clone()),
            };
            let (Some(from_col), Some(to_column)) = (table.column(&from), to_column) else {
                tracing::warn!(db_id, table = %table.name, %from, "foreign key to unknown column dropped");
                continue;
            };
            foreign_keys.push(ForeignKey {
                from_table: table.name.clone(),
                from_column: from_col.name.clone(),
                to_table: target_table.name.clone(),
                to_column,
            });
        }
    }

    Ok(DatabaseSchema {
        db_id: db_id.to_string(),
        file_path: path.to_path_buf(),
        tables,
        foreign_keys,
    })
}

/// Introspect every `<root>/database/<db_id>/<db_id>.sqlite`, sorted by db_id.
pub fn load_corpus(corpus_root: &Path, sample_value_count: usize) -> Result<Vec<DatabaseSchema>, SchemaError> {
    let dir = corpus_root.join("database");
    let entries = fs::read_dir(&dir).map_err(|e| SchemaError::IoError {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let mut ids: Vec<String> = entries
        .filter_map(Result::ok)
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|id| database_path(corpus_root, id).is_file())
        .collect();
    ids.sort();
    ids.iter()
        .map(|id| introspect_database(&database_path(corpus_root, id), id, sample_value_count))
        .collect()
}

/// How much column metadata goes into each `CREATE TABLE` line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PromptStyle {
    /// Column names only.
    #[default]
    NamesOnly,
    /// Names with declared types, primary-key markers, and sample values.
    Extended,
}

fn needs_quotes(name: &str) -> bool {
    name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn prompt_ident(name: &str) -> String {
    if needs_quotes(name) {
        quote_ident(name)
    } else {
        name.to_string()
    }
}

fn render_column(col: &ColumnSchema, style: PromptStyle) -> String {
    let mut out = prompt_ident(&col.name);
    if style == PromptStyle::Extended {
        if !col.declared_type.is_empty() {
            out.push(' ');
            out.push_str(&col.declared_type);
        }
        if col.is_primary_key {
            out.push_str(" PRIMARY KEY");
        }
        if !col.sample_values.is_empty() {
            let samples: Vec<String> = col
                .sample_values
                .iter()
                .map(|v| match v {
                    CellValue::Text(t) => format!("'{}'", t.replace('\'', "''")),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&format!(" /* {} */", samples.join(", ")));
        }
    }
    out
}

/// The `CREATE TABLE` block alone. Every line ends with `;` except the last,
/// which ends with `.`.
pub fn render_schema_block(schema_list: &[TableSchema], style: PromptStyle) -> String {
    let mut out = String::new();
    for (i, table) in schema_list.iter().enumerate() {
        let cols: Vec<String> = table.columns.iter().map(|c| render_column(c, style)).collect();
        let terminator = if i + 1 == schema_list.len() { '.' } else { ';' };
        out.push_str(&format!(
            "CREATE TABLE {}({}){terminator}\n",
            prompt_ident(&table.name),
            cols.join(", ")
        ));
    }
    out
}

/// Render the generation prompt: one `CREATE TABLE` line per table, the
/// instruction line, then the question as a `--` comment.
pub fn render_prompt(schema_list: &[TableSchema], question: &str) -> Result<String, SchemaError> {
    render_prompt_with(schema_list, question, PromptStyle::NamesOnly)
}

pub fn render_prompt_with(
    schema_list: &[TableSchema],
    question: &str,
    style: PromptStyle,
) -> Result<String, SchemaError> {
    if schema_list.is_empty() {
        return Err(SchemaError::EmptySchemaList);
    }
    let mut out = render_schema_block(schema_list, style);
    out.push_str(PROMPT_INSTRUCTION);
    out.push('\n');
    // Keep the question on one line so the prompt has exactly two `-- ` lines.
    let question = question.split_whitespace().collect::<Vec<_>>().join(" ");
    out.push_str(&format!("-- {question}"));
    Ok(out)
}
