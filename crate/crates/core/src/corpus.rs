//! Samples, JSON-lines I/O, and the on-disk corpus layout.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{self, DatabaseSchema, SchemaError, TableSchema};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}: invalid record: {message}")]
    Json { path: PathBuf, line: usize, message: String },
    #[error("corpus layout error: {0}")]
    Layout(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// One question / gold SQL pair over one database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
    /// Schema list shown in the prompt; the full database schema unless
    /// augmented.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schema_tables: Vec<TableSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub sql: String,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::Io { path: path.into(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io { path: path.into(), message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Json {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let io_err = |e: std::io::Error| CorpusError::Io { path: path.into(), message: e.to_string() };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| CorpusError::Json {
            path: path.into(),
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// A corpus root with lazily introspected schemas.
#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    schemas: BTreeMap<String, DatabaseSchema>,
}

impl Corpus {
    /// Introspect every database under `<root>/database/`.
    pub fn open(root: &Path) -> Result<Self, CorpusError> {
        if !root.join("database").is_dir() {
            return Err(CorpusError::Layout(format!("{} has no database/ directory", root.display())));
        }
        let schemas = schema::load_corpus(root, 0)?
            .into_iter()
            .map(|s| (s.db_id.clone(), s))
            .collect();
        Ok(Corpus { root: root.to_path_buf(), schemas })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn db_path(&self, db_id: &str) -> PathBuf {
        schema::database_path(&self.root, db_id)
    }

    pub fn schema(&self, db_id: &str) -> Result<&DatabaseSchema, CorpusError> {
        self.schemas.get(db_id).ok_or_else(|| {
            CorpusError::Layout(format!("database {db_id} not found at {}", self.db_path(db_id).display()))
        })
    }

    pub fn schemas(&self) -> impl Iterator<Item = &DatabaseSchema> {
        self.schemas.values()
    }

    /// Fill in `schema_tables` with the full database schema where empty.
    pub fn attach_schemas(&self, samples: &mut [Sample]) -> Result<(), CorpusError> {
        for s in samples {
            if s.schema_tables.is_empty() {
                s.schema_tables = self.schema(&s.db_id)?.tables.clone();
            }
        }
        Ok(())
    }

    pub fn load_samples(&self, path: &Path) -> Result<Vec<Sample>, CorpusError> {
        let mut samples: Vec<Sample> = read_jsonl(path)?;
        self.attach_schemas(&mut samples)?;
        Ok(samples)
    }
}

/// Variant databases for TS: `<variant_root>/<db_id>/*.sqlite`, sorted by the
/// numeric file stem (falling back to name order).
pub fn variant_paths(variant_root: &Path, db_id: &str) -> Vec<PathBuf> {
    let dir = variant_root.join(db_id);
    let Ok(entries) = fs::read_dir(&dir) else {
        return Vec::new();
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "sqlite"))
        .collect();
    paths.sort_by_key(|p| {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        (stem.parse::<u64>().unwrap_or(u64::MAX), stem)
    });
    paths
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_skips_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/preds.jsonl");
        let preds = vec![
            Prediction { sample_id: "a".into(), sql: "SELECT 1".into() },
            Prediction { sample_id: "b".into(), sql: "SELECT \"x\"\nFROM t".into() },
        ];
        write_jsonl(&path, &preds).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("\n\n");
        fs::write(&path, text).unwrap();
        let back: Vec<Prediction> = read_jsonl(&path).unwrap();
        assert_eq!(back, preds);
    }

    #[test]
    fn bad_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        fs::write(&path, "{\"sample_id\":\"a\",\"sql\":\"x\"}\nnot json\n").unwrap();
        match read_jsonl::<Prediction>(&path) {
            Err(CorpusError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variant_order_is_numeric() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join("x");
        fs::create_dir_all(&db).unwrap();
        for name in ["10.sqlite", "2.sqlite", "1.sqlite", "notes.txt"] {
            fs::write(db.join(name), b"").unwrap();
        }
        let names: Vec<String> = variant_paths(dir.path(), "x")
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["1.sqlite", "2.sqlite", "10.sqlite"]);
        assert!(variant_paths(dir.path(), "missing").is_empty());
    }

    #[test]
    fn missing_layout() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Corpus::open(dir.path()), Err(CorpusError::Layout(_))));
    }
}
