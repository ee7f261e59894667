//! End-to-end acceptance checks over the bundled fixture corpus.
//!
//! Runs as a plain binary and prints one PASS/FAIL line per criterion. The
//! process exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use sqlforge_core::augmentation::{cross_db_augment, inner_db_augment, Provenance};
use sqlforge_core::corpus::{Corpus, Sample};
use sqlforge_core::executor::{execute, results_match};
use sqlforge_core::fixtures::{build_fixture_corpus, FixtureCorpus};
use sqlforge_core::metrics::{evaluate_corpus, EvalOptions};
use sqlforge_core::model_client::{MockClient, MockEntry};
use sqlforge_core::preference::{mine_pairs, RejectedReason};
use sqlforge_core::refine::{invalid_check, parse_question, refine_corpus, RefineOptions, Role};
use sqlforge_core::sql_analysis::has_order_by;
use sqlforge_core::{render_prompt, validate, DatabaseSchema, ValidityStatus};

const TIMEOUT: Duration = Duration::from_secs(30);

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let fx = build_fixture_corpus(dir.path()).expect("fixture corpus");
    let corpus = Corpus::open(&fx.root).expect("open corpus");

    let criteria: Vec<Criterion> = vec![
        ("gold self-evaluation", Box::new(|| gold_self_eval(&fx))),
        ("EX oracle equivalence", Box::new(|| ex_oracle(&fx, &corpus))),
        ("tryout/player/college preference pair", Box::new(|| tryout_pair(&fx, &corpus))),
        ("augmentation invariants", Box::new(|| augmentation_invariants(&fx, &corpus))),
        ("reflection-loop improvement", Box::new(|| reflection_loop(&fx, &corpus))),
        ("termination and budget", Box::new(|| termination(&fx, &corpus))),
        ("determinism", Box::new(|| determinism(&fx, dir.path()))),
        ("prompt fidelity", Box::new(|| prompt_fidelity(&corpus))),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = check();
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail}; {secs:.2}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({detail}; {secs:.2}s)", i + 1);
            }
        }
    }
    println!("\n{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sqlforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqlforge")).args(args).output().expect("spawn sqlforge")
}

fn checked(out: Output, what: &str) -> Result<Output, String> {
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!("{what} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)))
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn write_lines<T: serde::Serialize>(path: &Path, items: impl IntoIterator<Item = T>) {
    let text: String = items.into_iter().map(|i| serde_json::to_string(&i).unwrap() + "\n").collect();
    std::fs::write(path, text).expect("write jsonl");
}

fn write_gold_preds(fx: &FixtureCorpus, path: &Path) {
    write_lines(
        path,
        fx.samples.iter().map(|s| serde_json::json!({"sample_id": s.sample_id, "sql": s.gold_sql})),
    );
}

fn loaded_samples(fx: &FixtureCorpus, corpus: &Corpus) -> Vec<Sample> {
    corpus.load_samples(&fx.samples_path).expect("load samples")
}

// 1 -------------------------------------------------------------------------

fn gold_self_eval(fx: &FixtureCorpus) -> Verdict {
    let preds = fx.root.join("gold_preds.jsonl");
    write_gold_preds(fx, &preds);
    let started = Instant::now();
    let out = checked(
        sqlforge(&[
            "--json",
            "eval",
            "--samples",
            path_str(&fx.samples_path),
            "--preds",
            path_str(&preds),
            "--corpus",
            path_str(&fx.root),
            "--variants",
            path_str(&fx.variant_root),
        ]),
        "eval",
    )?;
    let elapsed = started.elapsed();
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("bad JSON summary: {e}"))?;
    let ex = summary["ex_accuracy"].as_f64();
    let ts = summary["ts_accuracy"].as_f64();
    let n = summary["n_samples"].as_u64();
    ensure(n == Some(fx.samples.len() as u64), || format!("n_samples {n:?}"))?;
    ensure(ex == Some(1.0), || format!("EX {ex:?}, expected exactly 1.0"))?;
    ensure(ts == Some(1.0), || format!("TS {ts:?}, expected exactly 1.0"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("eval took {elapsed:?}"))?;
    Ok(format!("EX 1.0, TS 1.0 over {} samples in {:.2}s", fx.samples.len(), elapsed.as_secs_f64()))
}

// 2 -------------------------------------------------------------------------

/// Cell as seen by the reference comparator.
#[derive(Debug, Clone)]
enum Cell {
    Null,
    Num(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Num(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }

    fn same(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Null, Cell::Null) => true,
            (Cell::Num(a), Cell::Num(b)) => a == b || (a - b).abs() <= 1e-6 * a.abs().max(b.abs()),
            (Cell::Text(a), Cell::Text(b)) => a == b,
            (Cell::Blob(a), Cell::Blob(b)) => a == b,
            _ => false,
        }
    }

    fn order(&self, other: &Cell) -> std::cmp::Ordering {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => a.total_cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Blob(a), Cell::Blob(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

fn reference_rows(db: &Path, sql: &str) -> Option<Vec<Vec<Cell>>> {
    let conn = Connection::open_with_flags(db, OpenFlags::SQLITE_OPEN_READ_ONLY).ok()?;
    let mut stmt = conn.prepare(sql).ok()?;
    let width = stmt.column_count();
    let mut rows = stmt.query([]).ok()?;
    let mut out = Vec::new();
    while let Some(row) = rows.next().ok()? {
        let cells = (0..width)
            .map(|i| match row.get_ref(i).unwrap() {
                ValueRef::Null => Cell::Null,
                ValueRef::Integer(v) => Cell::Num(v as f64),
                ValueRef::Real(v) => Cell::Num(v),
                ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
            })
            .collect();
        out.push(cells);
    }
    Some(out)
}

fn rows_equal(a: &[Vec<Cell>], b: &[Vec<Cell>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.same(q)))
}

/// Brute force: elementwise when the gold is ordered, otherwise sort both
/// sides and compare elementwise.
fn reference_match(pred: Option<Vec<Vec<Cell>>>, gold: Vec<Vec<Cell>>, ordered: bool) -> bool {
    let Some(mut pred) = pred else {
        return false;
    };
    if ordered {
        return rows_equal(&pred, &gold);
    }
    let mut gold = gold;
    let key = |a: &Vec<Cell>, b: &Vec<Cell>| {
        a.iter().zip(b).map(|(x, y)| x.order(y)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len()))
    };
    pred.sort_by(key);
    gold.sort_by(key);
    rows_equal(&pred, &gold)
}

#[derive(Debug, Clone)]
struct GenQuery {
    distinct: bool,
    columns: Vec<String>,
    table: String,
    filter: Option<(String, String, f64)>,
    order: Option<(String, bool)>,
    limit: Option<usize>,
    doubled: bool,
}

impl GenQuery {
    fn render(&self) -> String {
        let mut sql = format!(
            "SELECT {}{} FROM \"{}\"",
            if self.distinct { "DISTINCT " } else { "" },
            self.columns.join(", "),
            self.table
        );
        if let Some((col, op, v)) = &self.filter {
            sql += &format!(" WHERE {col} {op} {v}");
        }
        if let Some((col, desc)) = &self.order {
            sql += &format!(" ORDER BY {col}{}", if *desc { " DESC" } else { "" });
        }
        if let Some(n) = self.limit {
            sql += &format!(" LIMIT {n}");
        }
        if self.doubled {
            sql = format!("SELECT * FROM ({sql}) UNION ALL SELECT * FROM ({sql})");
        }
        sql
    }
}

struct TableInfo {
    db: PathBuf,
    name: String,
    columns: Vec<String>,
    numeric: Vec<String>,
}

fn table_infos(corpus: &Corpus) -> Vec<TableInfo> {
    let mut out = Vec::new();
    for schema in corpus.schemas() {
        let path = corpus.db_path(&schema.db_id);
        let conn = Connection::open_with_flags(&path, OpenFlags::SQLITE_OPEN_READ_ONLY).unwrap();
        let names: Vec<String> = conn
            .prepare("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")
            .unwrap()
            .query_map([], |r| r.get(0))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        for name in names {
            let cols: Vec<(String, String)> = conn
                .prepare(&format!("PRAGMA table_info(\"{name}\")"))
                .unwrap()
                .query_map([], |r| Ok((r.get(1)?, r.get(2)?)))
                .unwrap()
                .collect::<Result<_, _>>()
                .unwrap();
            let numeric = cols
                .iter()
                .filter(|(_, t)| matches!(t.to_ascii_uppercase().as_str(), "INTEGER" | "REAL"))
                .map(|(c, _)| format!("\"{c}\""))
                .collect();
            out.push(TableInfo {
                db: path.clone(),
                name,
                columns: cols.into_iter().map(|(c, _)| format!("\"{c}\"")).collect(),
                numeric,
            });
        }
    }
    out
}

fn column_values(db: &Path, table: &str, col: &str) -> Vec<f64> {
    let conn = Connection::open_with_flags(db, OpenFlags::SQLITE_OPEN_READ_ONLY).unwrap();
    let mut stmt = conn.prepare(&format!("SELECT {col} FROM \"{table}\" WHERE {col} IS NOT NULL")).unwrap();
    let vals = stmt.query_map([], |r| r.get::<_, f64>(0)).unwrap().collect::<Result<Vec<_>, _>>().unwrap();
    vals
}

fn generate_pair(rng: &mut ChaCha8Rng, tables: &[TableInfo]) -> (PathBuf, String, GenQuery) {
    let t = tables.choose(rng).unwrap();
    let width = rng.gen_range(1..=t.columns.len().min(3));
    let columns: Vec<String> = t.columns.choose_multiple(rng, width).cloned().collect();
    let filter = if !t.numeric.is_empty() && rng.gen_bool(0.5) {
        let col = t.numeric.choose(rng).unwrap().clone();
        let vals = column_values(&t.db, &t.name, &col);
        vals.choose(rng).map(|v| (col, [">", "<=", "="].choose(rng).unwrap().to_string(), *v))
    } else {
        None
    };
    let order = rng.gen_bool(0.4).then(|| (t.columns.choose(rng).unwrap().clone(), rng.gen_bool(0.5)));
    let limit = (order.is_some() && rng.gen_bool(0.3)).then(|| rng.gen_range(1..=4));
    let gold = GenQuery { distinct: false, columns, table: t.name.clone(), filter, order, limit, doubled: false };

    let mut pred = gold.clone();
    match rng.gen_range(0..12) {
        0 => {}
        1 => pred.distinct = !pred.distinct,
        2 => match (&mut pred.filter, t.numeric.choose(rng)) {
            (Some((_, _, v)), _) => *v += rng.gen_range(-2.0..2.0_f64).round(),
            (None, Some(col)) => pred.filter = Some((col.clone(), ">".into(), 1.0)),
            (None, None) => pred.columns.reverse(),
        },
        3 => pred.order = None,
        4 => match &mut pred.order {
            Some((_, desc)) => *desc = !*desc,
            None => pred.order = Some((pred.columns[0].clone(), true)),
        },
        5 => {
            if pred.columns.len() > 1 {
                pred.columns.rotate_left(1);
            } else {
                pred.columns[0] = t.columns.choose(rng).unwrap().clone();
            }
        }
        k @ 6..=8 => {
            let factor = ["1.0", "1.0000000001", "1.001"][k - 6];
            if let Some(i) = pred.columns.iter().position(|c| t.numeric.contains(c)) {
                pred.columns[i] = format!("{} * {factor}", pred.columns[i]);
            }
        }
        9 => pred.columns[0] = "\"no_such_column\"".into(),
        10 => pred.limit = Some(rng.gen_range(1..=3)),
        _ => pred.doubled = true,
    }
    (t.db.clone(), pred.render(), gold)
}

fn ex_oracle(_fx: &FixtureCorpus, corpus: &Corpus) -> Verdict {
    let tables = table_infos(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut agree, mut matches) = (0, 0);
    let mut disagreements = Vec::new();
    for _ in 0..200 {
        let (db, pred_sql, gold) = generate_pair(&mut rng, &tables);
        let gold_sql = gold.render();
        let gold_rows = reference_rows(&db, &gold_sql).ok_or_else(|| format!("generated gold failed: {gold_sql}"))?;
        let expected = reference_match(reference_rows(&db, &pred_sql), gold_rows, gold.order.is_some());

        let pred_out = execute(&db, &pred_sql, TIMEOUT).map_err(|e| e.to_string())?;
        let gold_out = execute(&db, &gold_sql, TIMEOUT).map_err(|e| e.to_string())?;
        let got = results_match(&pred_out, &gold_out, has_order_by(&gold_sql)).map_err(|e| e.to_string())?;
        if got == expected {
            agree += 1;
        } else {
            disagreements.push(format!("pred `{pred_sql}` gold `{gold_sql}`: results_match {got}, reference {expected}"));
        }
        matches += usize::from(expected);
    }
    ensure(agree == 200, || format!("{agree}/200 agree; first: {}", disagreements[0]))?;
    ensure(matches > 20 && matches < 180, || format!("degenerate pair mix: {matches}/200 matching"))?;
    Ok(format!("200/200 agree ({matches} matching, {} not)", 200 - matches))
}

// 3 -------------------------------------------------------------------------

const TRYOUT_REFERENCE: &str = "CREATE TABLE tryout(pid, cname, decision, ppos);
CREATE TABLE player(hs, pname, ycard, pid);
CREATE TABLE college(cname, enr, state).
-- Using valid SQLite, answer the following questions for the tables provided above.

-- For each position, what is the minimum time students spent practicing?";
const TRYOUT_CHOSEN: &str =
    "SELECT min(player.hs) ,   tryout.ppos FROM tryout JOIN player ON tryout.pid  =  player.pid GROUP BY tryout.ppos";
const TRYOUT_REJECTED: &str = "SELECT min(HS) ,  ppos FROM player GROUP BY ppos";

fn non_blank_lines(text: &str) -> Vec<&str> {
    text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect()
}

fn tryout_pair(fx: &FixtureCorpus, corpus: &Corpus) -> Verdict {
    let sample = loaded_samples(fx, corpus)
        .into_iter()
        .find(|s| s.db_id == "soccer_2" && s.gold_sql == TRYOUT_CHOSEN)
        .ok_or("no soccer_2 sample with the reference gold")?;
    let db = corpus.db_path("soccer_2");
    let gold = execute(&db, TRYOUT_CHOSEN, TIMEOUT).map_err(|e| e.to_string())?;
    let rejected = execute(&db, TRYOUT_REJECTED, TIMEOUT).map_err(|e| e.to_string())?;
    ensure(!results_match(&rejected, &gold, false).unwrap(), || "gold and rejected agree".into())?;

    let n = 8;
    let client = MockClient::from_responses(vec![TRYOUT_REJECTED; n]);
    let pairs = mine_pairs(&sample, &client, n, 0.5, &db).map_err(|e| e.to_string())?;
    ensure(pairs.len() == 1, || format!("{} pairs, expected 1", pairs.len()))?;
    let pair = &pairs[0];
    ensure(non_blank_lines(&pair.prompt) == non_blank_lines(TRYOUT_REFERENCE), || {
        format!("prompt differs:\n{}", pair.prompt)
    })?;
    ensure(pair.chosen == TRYOUT_CHOSEN, || format!("chosen `{}`", pair.chosen))?;
    ensure(pair.rejected == TRYOUT_REJECTED, || format!("rejected `{}`", pair.rejected))?;
    ensure(pair.rejected_reason == RejectedReason::ExecError, || format!("reason {:?}", pair.rejected_reason))?;
    Ok(format!("1 pair from {n} candidates, rejected by {:?}", pair.rejected_reason))
}

// 4 -------------------------------------------------------------------------

/// Table and key facts read straight from the SQLite files.
struct DbFacts {
    tables: BTreeMap<String, Vec<String>>,
    primary: BTreeMap<String, Vec<String>>,
    /// (from_table, from_column, to_table, to_column)
    foreign: Vec<(String, String, String, String)>,
}

fn db_facts(path: &Path) -> DbFacts {
    let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY).unwrap();
    let names: Vec<String> = conn
        .prepare("SELECT name FROM sqlite_master WHERE type = 'table'")
        .unwrap()
        .query_map([], |r| r.get(0))
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    let mut facts = DbFacts { tables: BTreeMap::new(), primary: BTreeMap::new(), foreign: Vec::new() };
    for name in names {
        let cols: Vec<(String, i64)> = conn
            .prepare(&format!("PRAGMA table_info(\"{name}\")"))
            .unwrap()
            .query_map([], |r| Ok((r.get(1)?, r.get(5)?)))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        facts.primary.insert(name.clone(), cols.iter().filter(|c| c.1 > 0).map(|c| c.0.clone()).collect());
        facts.tables.insert(name.clone(), cols.into_iter().map(|c| c.0).collect());
        let fks: Vec<(String, String, String)> = conn
            .prepare(&format!("PRAGMA foreign_key_list(\"{name}\")"))
            .unwrap()
            .query_map([], |r| Ok((r.get(2)?, r.get(3)?, r.get(4)?)))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        for (to_table, from, to) in fks {
            facts.foreign.push((name.clone(), from, to_table, to));
        }
    }
    facts
}

fn lower(s: &str) -> String {
    s.to_ascii_lowercase()
}

/// Key column names (lowercase) of `tables`: their primary keys and both
/// ends of every foreign key touching them.
fn oracle_keys(facts: &DbFacts, tables: &BTreeSet<String>) -> BTreeSet<String> {
    let mut keys = BTreeSet::new();
    for (t, pk) in &facts.primary {
        if tables.contains(&lower(t)) {
            keys.extend(pk.iter().map(|c| lower(c)));
        }
    }
    for (ft, fc, tt, tc) in &facts.foreign {
        if tables.contains(&lower(ft)) || tables.contains(&lower(tt)) {
            keys.insert(lower(fc));
            keys.insert(lower(tc));
        }
    }
    keys
}

/// Identifier-like words of `sql`, outside string literals, lowercased.
fn gold_words(sql: &str) -> BTreeSet<String> {
    let mut words = BTreeSet::new();
    let mut chars = sql.chars().peekable();
    let mut current = String::new();
    while let Some(c) = chars.next() {
        match c {
            '\'' => {
                for d in chars.by_ref() {
                    if d == '\'' {
                        break;
                    }
                }
            }
            '"' | '`' | '[' => {
                let close = match c {
                    '[' => ']',
                    other => other,
                };
                let quoted: String = chars.by_ref().take_while(|&d| d != close).collect();
                words.insert(lower(&quoted));
            }
            c if c.is_alphanumeric() || c == '_' => {
                current.push(c);
                continue;
            }
            _ => {}
        }
        if !current.is_empty() {
            words.insert(lower(&current));
            current.clear();
        }
    }
    if !current.is_empty() {
        words.insert(lower(&current));
    }
    words
}

fn restricted(db: &DatabaseSchema, tables: &[sqlforge_core::TableSchema]) -> DatabaseSchema {
    DatabaseSchema { tables: tables.to_vec(), ..db.clone() }
}

fn augmentation_invariants(fx: &FixtureCorpus, corpus: &Corpus) -> Verdict {
    let started = Instant::now();
    let samples = loaded_samples(fx, corpus);
    let all: Vec<DatabaseSchema> = corpus.schemas().cloned().collect();
    let facts: HashMap<String, DbFacts> =
        all.iter().map(|d| (d.db_id.clone(), db_facts(&corpus.db_path(&d.db_id)))).collect();
    let mut violations: Vec<String> = Vec::new();
    let mut tally = BTreeMap::<&str, usize>::new();
    let violate = |v: &mut Vec<String>, msg: String| {
        if v.len() < 5 {
            v.push(msg);
        } else {
            v.push(String::new());
        }
    };

    for sample in &samples {
        let db = corpus.schema(&sample.db_id).unwrap();
        let own = &facts[&sample.db_id];
        let own_names: BTreeSet<String> = sample.schema_tables.iter().map(|t| lower(&t.name)).collect();
        let keys = oracle_keys(own, &own_names);
        let q: BTreeSet<String> = facts
            .iter()
            .filter(|(id, _)| **id != sample.db_id)
            .flat_map(|(_, f)| f.tables.iter())
            .filter(|(name, cols)| !own_names.contains(&lower(name)) && cols.iter().any(|c| keys.contains(&lower(c))))
            .map(|(name, _)| lower(name))
            .collect();
        let words = gold_words(&sample.gold_sql);
        let used_tables = sample.schema_tables.iter().filter(|t| words.contains(&lower(&t.name))).count();

        for seed in 0..1000u64 {
            // Cross-DB
            let aug = cross_db_augment(sample, &all, seed);
            match &aug.provenance {
                Provenance::Unchanged { .. } => {
                    *tally.entry("cross unchanged").or_default() += 1;
                    if !q.is_empty() || aug.schema_tables != sample.schema_tables {
                        violate(&mut violations, format!("{} seed {seed}: unchanged with {} candidates", sample.sample_id, q.len()));
                    }
                }
                Provenance::CrossDb { inserted_tables, source_db_ids } => {
                    *tally.entry("cross augmented").or_default() += 1;
                    let n = inserted_tables.len();
                    if !(1..=3).contains(&n) || n > q.len() || source_db_ids.len() != n {
                        violate(&mut violations, format!("{} seed {seed}: N = {n}", sample.sample_id));
                    }
                    let names: BTreeSet<String> = inserted_tables.iter().map(|t| lower(t)).collect();
                    if names.len() != n {
                        violate(&mut violations, format!("{} seed {seed}: repeated insert", sample.sample_id));
                    }
                    for (t, src) in inserted_tables.iter().zip(source_db_ids) {
                        let sound = src != &sample.db_id
                            && !own_names.contains(&lower(t))
                            && facts.get(src).and_then(|f| f.tables.get(t)).is_some_and(|cols| {
                                cols.iter().any(|c| keys.contains(&lower(c)))
                                    && aug.schema_tables.iter().any(|st| {
                                        st.name == *t && st.columns.iter().map(|c| &c.name).eq(cols.iter())
                                    })
                            });
                        if !sound {
                            violate(&mut violations, format!("{} seed {seed}: unsound insert {src}.{t}", sample.sample_id));
                        }
                    }
                    let kept: Vec<_> =
                        aug.schema_tables.iter().filter(|t| !names.contains(&lower(&t.name))).cloned().collect();
                    if kept != sample.schema_tables || aug.schema_tables.len() != sample.schema_tables.len() + n {
                        violate(&mut violations, format!("{} seed {seed}: own tables altered", sample.sample_id));
                    }
                }
                other => violate(&mut violations, format!("{} seed {seed}: cross-db gave {other:?}", sample.sample_id)),
            }
            let report = validate(&sample.gold_sql, &restricted(db, &aug.schema_tables));
            if !report.is_valid() {
                violate(&mut violations, format!("{} seed {seed}: cross-db gold {:?}", sample.sample_id, report.status));
            }

            // Inner-DB
            let aug = match inner_db_augment(sample, db, seed) {
                Ok(a) => a,
                Err(e) => {
                    violate(&mut violations, format!("{} seed {seed}: inner-db error {e}", sample.sample_id));
                    continue;
                }
            };
            *tally.entry("inner").or_default() += 1;
            let report = validate(&sample.gold_sql, &restricted(db, &aug.schema_tables));
            if !report.is_valid() {
                violate(&mut violations, format!("{} seed {seed}: inner-db gold {:?}", sample.sample_id, report.status));
            }
            if aug.schema_tables.is_empty() || aug.schema_tables.len() > used_tables.max(6) {
                violate(&mut violations, format!("{} seed {seed}: {} tables", sample.sample_id, aug.schema_tables.len()));
            }
            for t in &aug.schema_tables {
                let Some(original) = own.tables.get(&t.name) else {
                    violate(&mut violations, format!("{} seed {seed}: foreign table {}", sample.sample_id, t.name));
                    continue;
                };
                let used_cols = original.iter().filter(|c| words.contains(&lower(c))).count();
                let subset = t.columns.iter().all(|c| original.contains(&c.name));
                if !subset || t.columns.is_empty() || t.columns.len() > used_cols.max(10) {
                    violate(
                        &mut violations,
                        format!("{} seed {seed}: table {} has {} columns", sample.sample_id, t.name, t.columns.len()),
                    );
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(violations.is_empty(), || {
        let shown: Vec<_> = violations.iter().filter(|v| !v.is_empty()).collect();
        format!("{} violations, e.g. {shown:?}", violations.len())
    })?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("0 violations over 1000 seeds x {} samples per mode; {tally:?}", samples.len()))
}

// 5 -------------------------------------------------------------------------

/// (sample, generator output, expected static class, debugger fixes it)
fn scripted_failures(samples: &[Sample]) -> Vec<(String, String, ValidityStatus, bool)> {
    let gold = |id: &str| samples.iter().find(|s| s.sample_id == id).unwrap().gold_sql.clone();
    vec![
        ("cs_01".into(), "SELECT count(*) FROM singers".into(), ValidityStatus::WrongTableName, true),
        ("eh_01".into(), "SELECT count(*) FROM employees".into(), ValidityStatus::WrongTableName, true),
        ("cr_05".into(), gold("cr_05").replace("countries", "country"), ValidityStatus::WrongTableName, false),
        ("sc_01".into(), TRYOUT_REJECTED.into(), ValidityStatus::WrongColumnName, true),
        ("pt_02".into(), gold("pt_02").replace("PetType", "pet_type"), ValidityStatus::WrongColumnName, true),
        ("fl_04".into(), "SELECT count(*) FROM airlines WHERE Nation = 'USA'".into(), ValidityStatus::WrongColumnName, false),
        (
            "wd_01".into(),
            "SELECT sum(Populations) FROM country WHERE Continent = 'Asia'".into(),
            ValidityStatus::WrongColumnName,
            false,
        ),
        ("bn_01".into(), "SELECT free text FROM stops".into(), ValidityStatus::MissingQuotation, true),
        ("bn_02".into(), "SELECT name FROM stops WHERE route/line = 'A1'".into(), ValidityStatus::MissingQuotation, true),
        ("bn_05".into(), "SELECT free text FROM stops WHERE stop_id = 3".into(), ValidityStatus::MissingQuotation, false),
    ]
}

fn refine_ex(
    samples: &[Sample],
    corpus: &Corpus,
    generator: &MockClient,
    debugger: &MockClient,
    max_iters: usize,
) -> Result<(f64, usize), String> {
    let opts = RefineOptions { max_iters, ..RefineOptions::default() };
    let report = refine_corpus(samples, corpus, generator, debugger, &opts, 4).map_err(|e| e.to_string())?;
    let preds: BTreeMap<String, String> = report.predictions.into_iter().map(|p| (p.sample_id, p.sql)).collect();
    let eval = evaluate_corpus(&preds, samples, corpus, None, &EvalOptions::default()).map_err(|e| e.to_string())?;
    let hits = eval.verdicts.iter().filter(|v| v.ex_match).count();
    Ok((eval.ex_accuracy, hits))
}

fn reflection_loop(fx: &FixtureCorpus, corpus: &Corpus) -> Verdict {
    let samples = loaded_samples(fx, corpus);
    let failures = scripted_failures(&samples);
    let failing: BTreeMap<&str, _> = failures.iter().map(|f| (f.0.as_str(), f)).collect();

    for (id, sql, expected, _) in &failures {
        let sample = samples.iter().find(|s| &s.sample_id == id).unwrap();
        let db = corpus.schema(&sample.db_id).unwrap();
        let (report, _) = invalid_check(sql, db, &corpus.db_path(&sample.db_id), TIMEOUT);
        ensure(report.status == *expected, || format!("{id}: `{sql}` classified {:?}, scripted as {expected:?}", report.status))?;
    }

    let generator = || {
        MockClient::new(
            samples
                .iter()
                .map(|s| MockEntry {
                    pattern: Some(format!("\n-- {}", s.question)),
                    responses: vec![failing.get(s.sample_id.as_str()).map_or(s.gold_sql.clone(), |f| f.1.clone())],
                })
                .collect(),
        )
    };
    let debugger = || {
        MockClient::new(
            failures
                .iter()
                .map(|(id, broken, _, fixes)| {
                    let s = samples.iter().find(|s| &s.sample_id == id).unwrap();
                    MockEntry {
                        pattern: Some(format!("-- Question: {}\n", s.question)),
                        responses: if *fixes { vec![s.gold_sql.clone()] } else { vec![broken.clone(); 2] },
                    }
                })
                .collect(),
        )
    };

    let (gen_base, dbg_base) = (generator(), debugger());
    let (baseline, base_hits) = refine_ex(&samples, corpus, &gen_base, &dbg_base, 1)?;
    ensure(dbg_base.calls() == 0, || format!("baseline contacted the debugger {} times", dbg_base.calls()))?;

    let (gen, dbg) = (generator(), debugger());
    let (pipeline, hits) = refine_ex(&samples, corpus, &gen, &dbg, 3)?;
    ensure(base_hits == samples.len() - 10, || format!("baseline {base_hits}/{}", samples.len()))?;
    ensure(hits == base_hits + 6, || format!("pipeline {hits} vs baseline {base_hits}"))?;
    ensure(pipeline == baseline + 6.0 / samples.len() as f64, || format!("EX {pipeline} vs {baseline} + 6/50"))?;

    let contacted: BTreeSet<String> = dbg
        .prompts()
        .iter()
        .map(|p| {
            samples
                .iter()
                .find(|s| p.contains(&format!("-- Question: {}\n", s.question)))
                .map_or_else(|| "<unknown>".to_string(), |s| s.sample_id.clone())
        })
        .collect();
    let expected: BTreeSet<String> = failing.keys().map(|k| k.to_string()).collect();
    ensure(contacted == expected, || format!("debugger contacted for {contacted:?}"))?;
    ensure(dbg.calls() == 6 + 4 * 2, || format!("{} debugger calls", dbg.calls()))?;
    Ok(format!(
        "baseline EX {:.1}, pipeline EX {:.1}, debugger saw {} samples in {} calls",
        baseline * 100.0,
        pipeline * 100.0,
        contacted.len(),
        dbg.calls()
    ))
}

// 6 -------------------------------------------------------------------------

fn termination(_fx: &FixtureCorpus, corpus: &Corpus) -> Verdict {
    let db = corpus.schema("concert_singer").unwrap();
    let path = corpus.db_path("concert_singer");
    for max_iters in 1..=5 {
        let generator = MockClient::from_responses(["SELECT count(*) FROM singers"]);
        let debugger = MockClient::from_responses(vec!["SELECT nickname FROM singer"; 10]);
        let result = parse_question("How many singers do we have?", db, &generator, &debugger, &path, max_iters)
            .map_err(|e| e.to_string())?;
        ensure(!result.succeeded, || format!("max_iters {max_iters}: reported success"))?;
        ensure(result.attempts.len() == max_iters, || {
            format!("max_iters {max_iters}: {} attempts", result.attempts.len())
        })?;
        ensure(result.iterations_used == max_iters, || format!("iterations_used {}", result.iterations_used))?;
        ensure(debugger.calls() == max_iters - 1, || format!("{} debugger calls", debugger.calls()))?;
        ensure(result.attempts.iter().skip(1).all(|a| a.role == Role::Debugger), || "role order".into())?;
        ensure(result.final_sql == result.attempts.last().unwrap().sql, || "final_sql is not the last attempt".into())?;
    }
    Ok("max_iters 1..=5: attempts == max_iters, succeeded = false".into())
}

// 7 -------------------------------------------------------------------------

fn determinism(fx: &FixtureCorpus, dir: &Path) -> Verdict {
    let out = dir.join("determinism");
    std::fs::create_dir_all(&out).unwrap();
    let f = |name: &str| out.join(name);
    let (samples, root) = (path_str(&fx.samples_path), path_str(&fx.root));

    let script = f("mine_script.jsonl");
    write_lines(
        &script,
        fx.samples.iter().map(|s| MockEntry {
            pattern: Some(format!("\n-- {}", s.question)),
            responses: vec![
                s.gold_sql.clone(),
                "SELECT 1".into(),
                format!("```sql\n{}\n```", s.gold_sql.replace(' ', "  ")),
                "SELECT missing_column FROM missing_table".into(),
            ],
        }),
    );
    let mut compared = 0;
    for run in ["a", "b"] {
        for mode in ["cross-db", "inner-db"] {
            let target = f(&format!("{mode}.{run}.jsonl"));
            checked(
                sqlforge(&["--seed", "17", "augment", "--samples", samples, "--corpus", root, "--mode", mode, "--out", path_str(&target)]),
                "augment",
            )?;
        }
        let target = f(&format!("pairs.{run}.jsonl"));
        let mock = path_str(&script);
        checked(
            sqlforge(&[
                "--jobs", "8", "mine", "--samples", samples, "--corpus", root, "--mock", mock, "--n-candidates", "4", "--out",
                path_str(&target),
            ]),
            "mine",
        )?;
    }
    let preds = f("preds.jsonl");
    write_lines(
        &preds,
        fx.samples.iter().enumerate().map(|(i, s)| {
            let sql = if i % 3 == 0 { "SELECT 1".to_string() } else { s.gold_sql.clone() };
            serde_json::json!({"sample_id": s.sample_id, "sql": sql})
        }),
    );
    let mut stdouts = Vec::new();
    for (run, jobs) in [("a", "8"), ("b", "8"), ("c", "1")] {
        let target = f(&format!("report.{run}.json"));
        let output = checked(
            sqlforge(&[
                "--jobs", jobs, "--json", "eval", "--samples", samples, "--preds", path_str(&preds), "--corpus", root,
                "--variants", path_str(&fx.variant_root), "--out", path_str(&target),
            ]),
            "eval",
        )?;
        stdouts.push(output.stdout);
    }
    for stem in ["cross-db", "inner-db", "pairs", "report"] {
        let ext = if stem == "report" { "json" } else { "jsonl" };
        let runs: &[&str] = if stem == "report" { &["a", "b", "c"] } else { &["a", "b"] };
        let first = std::fs::read(f(&format!("{stem}.a.{ext}"))).unwrap();
        ensure(!first.is_empty(), || format!("{stem} output is empty"))?;
        for run in &runs[1..] {
            let other = std::fs::read(f(&format!("{stem}.{run}.{ext}"))).unwrap();
            ensure(first == other, || format!("{stem}.{run}.{ext} differs from run a"))?;
            compared += 1;
        }
    }
    ensure(stdouts.windows(2).all(|w| w[0] == w[1]), || "eval summaries differ".into())?;
    let pairs = std::fs::read_to_string(f("pairs.a.jsonl")).unwrap().lines().count();
    ensure(pairs == 2 * fx.samples.len(), || format!("{pairs} pairs, expected {}", 2 * fx.samples.len()))?;
    Ok(format!("{compared} reruns byte-identical, eval --jobs 1 == --jobs 8"))
}

// 8 -------------------------------------------------------------------------

const CONCERT_REFERENCE: &str = "CREATE TABLE stadium(Stadium_ID, Location, Name, Capacity, Highest, Lowest, Average);
CREATE TABLE singer(Singer_ID, Name, Country, Song_Name, Song_release_year, Age, Is_male);
CREATE TABLE concert(concert_ID, concert_Name, Theme, Stadium_ID, Year);
CREATE TABLE singer_in_concert(concert_ID, Singer_ID).
-- Using valid SQLite, answer the following questions for the tables provided above.
-- How many singers do we have?";

fn prompt_fidelity(corpus: &Corpus) -> Verdict {
    let db = corpus.schema("concert_singer").map_err(|e| e.to_string())?;
    let prompt = render_prompt(&db.tables, "How many singers do we have?").map_err(|e| e.to_string())?;
    ensure(prompt == CONCERT_REFERENCE, || format!("rendered:\n{prompt}"))?;
    ensure(
        prompt.lines().any(|l| l == "-- Using valid SQLite, answer the following questions for the tables provided above."),
        || "instruction line missing".into(),
    )?;
    Ok(format!("{} lines identical", prompt.lines().count()))
}
