//! Training-sample augmentation over the prompt's schema list.
//!
//! Cross-DB inserts distractor tables from other databases that share a
//! primary/foreign key column name with the sample's tables. Inner-DB keeps
//! every table and column the gold SQL uses, randomly keeps or drops the
//! rest, and caps the result at 6 tables of at most 10 columns each.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Corpus, Sample};
use crate::schema::{render_prompt, DatabaseSchema, SchemaError, TableSchema};
use crate::sql_analysis::{self, ReferenceProblem, UNRESOLVED};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("gold SQL of {sample_id} does not parse: {message}")]
    GoldUnparseable { sample_id: String, message: String },
    #[error("gold SQL of {sample_id} references something outside its schema: {detail}")]
    GoldReferencesUnknownColumn { sample_id: String, detail: String },
    #[error("database {0} not in corpus")]
    UnknownDatabase(String),
    #[error(transparent)]
    Prompt(#[from] SchemaError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Probability that an unused table survives Inner-DB.
    pub p_table: f64,
    /// Probability that an unused column of a kept table survives Inner-DB.
    pub p_col: f64,
    pub max_tables: usize,
    pub max_columns: usize,
    /// Upper bound of the uniform draw for Cross-DB insertions.
    pub max_inserted: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { p_table: 0.5, p_col: 0.7, max_tables: 6, max_columns: 10, max_inserted: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMode {
    CrossDb,
    InnerDb,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    CrossDb { inserted_tables: Vec<String>, source_db_ids: Vec<String> },
    /// Entries are `table` or `table.column`, relative to the input list.
    InnerDb { added: Vec<String>, removed: Vec<String> },
    Unchanged { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub base: Sample,
    pub schema_tables: Vec<TableSchema>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl AugmentedSample {
    pub fn prompt(&self) -> Result<String, SchemaError> {
        render_prompt(&self.schema_tables, &self.base.question)
    }
}

/// SFT-ready record written by `augment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub sample_id: String,
    pub prompt: String,
    pub completion: String,
    pub provenance: Provenance,
    pub seed: u64,
}

/// Stable per-sample seed derived from a global seed and the sample id.
pub fn derive_seed(global_seed: u64, sample_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(sample_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Tables of other databases eligible for Cross-DB insertion, in corpus order:
/// `(db_id, table)` pairs whose table has a column named like one of the
/// sample's key columns and whose name does not clash with the schema list.
pub fn cross_db_candidates<'a>(sample: &Sample, corpus: &'a [DatabaseSchema]) -> Vec<(&'a str, &'a TableSchema)> {
    let keys = match corpus.iter().find(|d| d.db_id == sample.db_id) {
        Some(own) => own.key_columns_of(&sample.schema_tables),
        None => sample
            .schema_tables
            .iter()
            .flat_map(|t| t.primary_key().map(|c| c.name.clone()))
            .collect(),
    };
    let mut taken: HashSet<String> = sample.schema_tables.iter().map(|t| t.name.to_lowercase()).collect();
    let mut out = Vec::new();
    for db in corpus.iter().filter(|d| d.db_id != sample.db_id) {
        for table in &db.tables {
            let shares_key = table.columns.iter().any(|c| keys.iter().any(|k| k.eq_ignore_ascii_case(&c.name)));
            if shares_key && taken.insert(table.name.to_lowercase()) {
                out.push((db.db_id.as_str(), table));
            }
        }
    }
    out
}

pub fn cross_db_augment(sample: &Sample, corpus: &[DatabaseSchema], seed: u64) -> AugmentedSample {
    cross_db_augment_with(sample, corpus, seed, &AugmentConfig::default())
}

pub fn cross_db_augment_with(
    sample: &Sample,
    corpus: &[DatabaseSchema],
    seed: u64,
    cfg: &AugmentConfig,
) -> AugmentedSample {
    let candidates = cross_db_candidates(sample, corpus);
    if candidates.is_empty() {
        return AugmentedSample {
            base: sample.clone(),
            schema_tables: sample.schema_tables.clone(),
            provenance: Provenance::Unchanged { reason: "empty candidate set".into() },
            seed,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=cfg.max_inserted.max(1)).min(candidates.len());
    let picks = index::sample(&mut rng, candidates.len(), n);

    let mut tables = sample.schema_tables.clone();
    let mut inserted_tables = Vec::with_capacity(n);
    let mut source_db_ids = Vec::with_capacity(n);
    for i in picks.iter() {
        let (db_id, table) = candidates[i];
        let pos = rng.gen_range(0..=tables.len());
        tables.insert(pos, table.clone());
        inserted_tables.push(table.name.clone());
        source_db_ids.push(db_id.to_string());
    }
    AugmentedSample {
        base: sample.clone(),
        schema_tables: tables,
        provenance: Provenance::CrossDb { inserted_tables, source_db_ids },
        seed,
    }
}

pub fn inner_db_augment(sample: &Sample, db: &DatabaseSchema, seed: u64) -> Result<AugmentedSample, AugmentError> {
    inner_db_augment_with(sample, db, seed, &AugmentConfig::default())
}

pub fn inner_db_augment_with(
    sample: &Sample,
    db: &DatabaseSchema,
    seed: u64,
    cfg: &AugmentConfig,
) -> Result<AugmentedSample, AugmentError> {
    let resolution = sql_analysis::resolve_against(&sample.gold_sql, db).map_err(|e| AugmentError::GoldUnparseable {
        sample_id: sample.sample_id.clone(),
        message: e.to_string(),
    })?;
    if let Some(p) = resolution.problems.first() {
        let detail = match p {
            ReferenceProblem::UnknownTable(t) => format!("table {t}"),
            ReferenceProblem::UnknownQualifier { qualifier, column } => format!("{qualifier}.{column}"),
            ReferenceProblem::UnknownColumn { column, tables } => format!("{column} not in {}", tables.join(", ")),
        };
        return Err(AugmentError::GoldReferencesUnknownColumn { sample_id: sample.sample_id.clone(), detail });
    }
    let refs = resolution.references;
    let unresolved: Vec<&str> = refs.columns_of(UNRESOLVED).collect();
    let table_used = |t: &TableSchema| refs.tables.iter().any(|u| u.eq_ignore_ascii_case(&t.name));
    let column_used = |t: &TableSchema, c: &str| {
        refs.columns_of(&t.name).any(|u| u.eq_ignore_ascii_case(c))
            || (table_used(t) && unresolved.iter().any(|u| u.eq_ignore_ascii_case(c)))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Random keep/drop; every draw happens in schema order for determinism.
    let mut kept: Vec<TableSchema> = Vec::new();
    for table in &db.tables {
        let keep_table = rng.gen_bool(cfg.p_table);
        if !(table_used(table) || keep_table) {
            continue;
        }
        let mut t = table.clone();
        t.columns.retain(|c| {
            let keep_col = rng.gen_bool(cfg.p_col);
            column_used(table, &c.name) || keep_col
        });
        kept.push(t);
    }

    // Table cap.
    let used_count = kept.iter().filter(|t| table_used(t)).count();
    if used_count >= cfg.max_tables {
        kept.retain(|t| table_used(t));
    } else if kept.len() > cfg.max_tables {
        let unused: Vec<usize> = (0..kept.len()).filter(|&i| !table_used(&kept[i])).collect();
        let excess = kept.len() - cfg.max_tables;
        let drop: HashSet<usize> = index::sample(&mut rng, unused.len(), excess).iter().map(|j| unused[j]).collect();
        kept = kept.into_iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, t)| t).collect();
    }

    // Column caps.
    for t in &mut kept {
        let used: Vec<bool> = t.columns.iter().map(|c| column_used(t, &c.name)).collect();
        let used_n = used.iter().filter(|&&u| u).count();
        if used_n > cfg.max_columns {
            let mut flags = used.iter();
            t.columns.retain(|_| *flags.next().unwrap_or(&false));
        } else if t.columns.len() > cfg.max_columns {
            let unused: Vec<usize> = (0..t.columns.len()).filter(|&i| !used[i]).collect();
            let excess = t.columns.len() - cfg.max_columns;
            let drop: HashSet<usize> = index::sample(&mut rng, unused.len(), excess).iter().map(|j| unused[j]).collect();
            let mut i = 0;
            t.columns.retain(|_| {
                let keep = !drop.contains(&i);
                i += 1;
                keep
            });
        }
        if t.columns.is_empty() {
            let source = db.table(&t.name).expect("kept table comes from the schema");
            let fallback = source.primary_key().next().or(source.columns.first());
            t.columns.extend(fallback.cloned());
        }
    }
    if kept.is_empty() {
        kept.extend(db.tables.first().cloned());
    }

    let provenance = diff_provenance(&sample.schema_tables, &kept);
    Ok(AugmentedSample { base: sample.clone(), schema_tables: kept, provenance, seed })
}

fn entries(tables: &[TableSchema]) -> Vec<String> {
    tables
        .iter()
        .flat_map(|t| std::iter::once(t.name.clone()).chain(t.columns.iter().map(move |c| format!("{}.{}", t.name, c.name))))
        .collect()
}

fn diff_provenance(before: &[TableSchema], after: &[TableSchema]) -> Provenance {
    let before = entries(before);
    let after = entries(after);
    let added = after.iter().filter(|e| !before.contains(e)).cloned().collect();
    let removed = before.iter().filter(|e| !after.contains(e)).cloned().collect();
    Provenance::InnerDb { added, removed }
}

/// Augment every sample with per-sample seeds derived from `global_seed`.
pub fn augment_corpus(
    samples: &[Sample],
    corpus: &Corpus,
    mode: AugmentMode,
    global_seed: u64,
    cfg: &AugmentConfig,
) -> Result<Vec<AugmentedRecord>, AugmentError> {
    let schemas: Vec<DatabaseSchema> = corpus.schemas().cloned().collect();
    samples
        .iter()
        .map(|sample| {
            let seed = derive_seed(global_seed, &sample.sample_id);
            let augmented = match mode {
                AugmentMode::CrossDb => cross_db_augment_with(sample, &schemas, seed, cfg),
                AugmentMode::InnerDb => {
                    let db = corpus
                        .schema(&sample.db_id)
                        .map_err(|_| AugmentError::UnknownDatabase(sample.db_id.clone()))?;
                    inner_db_augment_with(sample, db, seed, cfg)?
                }
            };
            Ok(AugmentedRecord {
                sample_id: sample.sample_id.clone(),
                prompt: augmented.prompt()?,
                completion: sample.gold_sql.clone(),
                provenance: augmented.provenance,
                seed,
            })
        })
        .collect()
}
