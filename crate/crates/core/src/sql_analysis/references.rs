//! Table and column reference extraction with alias and scope resolution.
//!
//! Resolution runs in two modes. Without a schema, a bare column is attributed
//! to the only table of its innermost scope, or to [`UNRESOLVED`]. With a
//! schema, bare columns are looked up in the tables of each scope from the
//! innermost outwards, and anything that cannot be found is reported as a
//! [`ReferenceProblem`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::*;
use crate::schema::DatabaseSchema;

/// Table slot for a column that could not be attributed to a table.
pub const UNRESOLVED: &str = "<unresolved>";

/// Columns SQLite accepts on every rowid table.
const ROWID_ALIASES: &[&str] = &["rowid", "oid", "_rowid_"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlReferences {
    pub tables: BTreeSet<String>,
    pub columns: BTreeSet<(String, String)>,
    pub has_order_by: bool,
}

impl SqlReferences {
    fn add_table(&mut self, name: &str) {
        if !self.tables.iter().any(|t| t.eq_ignore_ascii_case(name)) {
            self.tables.insert(name.to_string());
        }
    }

    fn add_column(&mut self, table: &str, column: &str) {
        let exists = self
            .columns
            .iter()
            .any(|(t, c)| t.eq_ignore_ascii_case(table) && c.eq_ignore_ascii_case(column));
        if !exists {
            self.columns.insert((table.to_string(), column.to_string()));
        }
    }

    /// Columns attributed to `table` (case-insensitive).
    pub fn columns_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.columns
            .iter()
            .filter(move |(t, _)| t.eq_ignore_ascii_case(table))
            .map(|(_, c)| c.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReferenceProblem {
    UnknownTable(String),
    /// `q.col` where `q` names no table or alias in scope.
    UnknownQualifier { qualifier: String, column: String },
    /// `tables` are the tables the column was looked up in.
    UnknownColumn { column: String, tables: Vec<String> },
}

#[derive(Debug, Clone, Default)]
pub struct Resolution {
    pub references: SqlReferences,
    pub problems: Vec<ReferenceProblem>,
}

#[derive(Debug, Clone)]
struct Source {
    /// Name usable as a qualifier: the alias when present.
    name: String,
    /// Base table name when the source is a real table.
    base: Option<String>,
    /// Known output columns; `None` when unknown.
    columns: Option<Vec<String>>,
}

impl Source {
    fn find_column(&self, column: &str) -> Option<Option<&str>> {
        self.columns
            .as_ref()
            .map(|cols| cols.iter().find(|c| c.eq_ignore_ascii_case(column)).map(String::as_str))
    }
}

struct Scope<'p> {
    sources: Vec<Source>,
    aliases: Vec<String>,
    parent: Option<&'p Scope<'p>>,
}

struct CteDef {
    name: String,
    columns: Option<Vec<String>>,
}

struct Resolver<'s> {
    schema: Option<&'s DatabaseSchema>,
    ctes: Vec<CteDef>,
    out: Resolution,
    /// Suppresses problem reporting (ORDER BY over compound selects).
    lenient: bool,
}

/// Resolve a parsed query, optionally against a schema.
pub fn resolve(query: &Query, schema: Option<&DatabaseSchema>) -> Resolution {
    let mut r = Resolver { schema, ctes: Vec::new(), out: Resolution::default(), lenient: false };
    r.query(query, None);
    r.out.references.has_order_by = top_level_order_by(query);
    r.out
}

fn top_level_order_by(query: &Query) -> bool {
    if !query.order_by.is_empty() {
        return true;
    }
    match &query.body {
        SetExpr::Nested(inner) => top_level_order_by(inner),
        _ => false,
    }
}

impl<'s> Resolver<'s> {
    fn problem(&mut self, p: ReferenceProblem) {
        if !self.lenient && self.schema.is_some() && !self.out.problems.contains(&p) {
            self.out.problems.push(p);
        }
    }

    /// Returns the query's output column names when known.
    fn query(&mut self, q: &Query, parent: Option<&Scope<'_>>) -> Option<Vec<String>> {
        let cte_mark = self.ctes.len();
        for cte in &q.with {
            let cols = self.query(&cte.query, None);
            let columns = if cte.columns.is_empty() {
                cols
            } else {
                Some(cte.columns.iter().map(|c| c.value.clone()).collect())
            };
            self.ctes.push(CteDef { name: cte.name.value.clone(), columns });
        }

        let columns = match &q.body {
            SetExpr::Select(sel) => {
                let (scope, cols) = self.select(sel, parent);
                for item in &q.order_by {
                    self.expr(&item.expr, &scope);
                }
                cols
            }
            body => {
                let cols = self.set_expr(body, parent);
                if !q.order_by.is_empty() {
                    let scope = Scope {
                        sources: Vec::new(),
                        aliases: cols.clone().unwrap_or_default(),
                        parent,
                    };
                    let was = std::mem::replace(&mut self.lenient, true);
                    for item in &q.order_by {
                        self.expr(&item.expr, &scope);
                    }
                    self.lenient = was;
                }
                cols
            }
        };

        let empty = Scope { sources: Vec::new(), aliases: Vec::new(), parent };
        for e in q.limit.iter().chain(q.offset.iter()) {
            self.expr(e, &empty);
        }
        self.ctes.truncate(cte_mark);
        columns
    }

    fn set_expr(&mut self, body: &SetExpr, parent: Option<&Scope<'_>>) -> Option<Vec<String>> {
        match body {
            SetExpr::Select(sel) => self.select(sel, parent).1,
            SetExpr::Values(rows) => {
                let scope = Scope { sources: Vec::new(), aliases: Vec::new(), parent };
                for e in rows.iter().flatten() {
                    self.expr(e, &scope);
                }
                rows.first().map(|r| (1..=r.len()).map(|i| format!("column{i}")).collect())
            }
            SetExpr::SetOperation { left, right, .. } => {
                let cols = self.set_expr(left, parent);
                self.set_expr(right, parent);
                cols
            }
            SetExpr::Nested(q) => self.query(q, parent),
        }
    }

    fn select<'p>(&mut self, sel: &Select, parent: Option<&'p Scope<'p>>) -> (Scope<'p>, Option<Vec<String>>) {
        let mut sources = Vec::new();
        for twj in &sel.from {
            self.collect_sources(twj, parent, &mut sources);
        }
        let aliases: Vec<String> = sel
            .projection
            .iter()
            .filter_map(|item| match item {
                SelectItem::Expr { alias: Some(a), .. } => Some(a.value.clone()),
                _ => None,
            })
            .collect();
        let scope = Scope { sources, aliases, parent };

        for twj in &sel.from {
            self.join_constraints(twj, &scope);
        }

        let mut output = Some(Vec::new());
        for item in &sel.projection {
            match item {
                SelectItem::Wildcard => {
                    let all: Option<Vec<String>> = scope
                        .sources
                        .iter()
                        .map(|s| s.columns.clone())
                        .collect::<Option<Vec<_>>>()
                        .map(|v| v.concat());
                    match (&mut output, all) {
                        (Some(out), Some(cols)) => out.extend(cols),
                        _ => output = None,
                    }
                }
                SelectItem::QualifiedWildcard(q) => {
                    match scope.sources.iter().find(|s| q.matches(&s.name)) {
                        Some(src) => match (&mut output, &src.columns) {
                            (Some(out), Some(cols)) => out.extend(cols.iter().cloned()),
                            _ => output = None,
                        },
                        None => {
                            self.problem(ReferenceProblem::UnknownQualifier {
                                qualifier: q.value.clone(),
                                column: "*".into(),
                            });
                            output = None;
                        }
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    self.expr(expr, &scope);
                    let name = match (alias, expr) {
                        (Some(a), _) => a.value.clone(),
                        (None, Expr::Identifier(i)) => i.value.clone(),
                        (None, Expr::Compound(_, c)) => c.value.clone(),
                        _ => String::new(),
                    };
                    if let Some(out) = &mut output {
                        out.push(name);
                    }
                }
            }
        }
        if let Some(e) = &sel.selection {
            self.expr(e, &scope);
        }
        for e in &sel.group_by {
            self.expr(e, &scope);
        }
        if let Some(e) = &sel.having {
            self.expr(e, &scope);
        }
        (scope, output)
    }

    fn collect_sources(&mut self, twj: &TableWithJoins, parent: Option<&Scope<'_>>, out: &mut Vec<Source>) {
        self.factor_source(&twj.relation, parent, out);
        for join in &twj.joins {
            self.factor_source(&join.relation, parent, out);
        }
    }

    fn factor_source(&mut self, factor: &TableFactor, parent: Option<&Scope<'_>>, out: &mut Vec<Source>) {
        match factor {
            TableFactor::Table { name, alias } => {
                let qualifier = alias.as_ref().unwrap_or(name).value.clone();
                if let Some(cte) = self.ctes.iter().rev().find(|c| name.matches(&c.name)) {
                    out.push(Source { name: qualifier, base: None, columns: cte.columns.clone() });
                    return;
                }
                let table = self.schema.and_then(|s| s.table(&name.value));
                let base = table.map(|t| t.name.clone()).unwrap_or_else(|| name.value.clone());
                if self.schema.is_some() && table.is_none() {
                    self.problem(ReferenceProblem::UnknownTable(name.value.clone()));
                }
                self.out.references.add_table(&base);
                out.push(Source {
                    name: qualifier,
                    base: Some(base),
                    columns: table.map(|t| t.columns.iter().map(|c| c.name.clone()).collect()),
                });
            }
            TableFactor::Derived { subquery, alias } => {
                let columns = self.query(subquery, parent);
                out.push(Source {
                    name: alias.as_ref().map(|a| a.value.clone()).unwrap_or_default(),
                    base: None,
                    columns,
                });
            }
            TableFactor::Nested(inner) => self.collect_sources(inner, parent, out),
        }
    }

    fn join_constraints(&mut self, twj: &TableWithJoins, scope: &Scope<'_>) {
        if let TableFactor::Nested(inner) = &twj.relation {
            self.join_constraints(inner, scope);
        }
        for join in &twj.joins {
            if let TableFactor::Nested(inner) = &join.relation {
                self.join_constraints(inner, scope);
            }
            match &join.constraint {
                JoinConstraint::On(e) => self.expr(e, scope),
                JoinConstraint::Using(cols) => {
                    for col in cols {
                        let holders: Vec<&Source> = scope
                            .sources
                            .iter()
                            .filter(|s| s.find_column(&col.value) != Some(None))
                            .collect();
                        if holders.is_empty() {
                            let tables = scope.sources.iter().filter_map(|s| s.base.clone()).collect();
                            self.problem(ReferenceProblem::UnknownColumn { column: col.value.clone(), tables });
                        }
                        for src in holders {
                            if let Some(base) = &src.base {
                                let name = src.find_column(&col.value).flatten().unwrap_or(&col.value).to_string();
                                self.out.references.add_column(base, &name);
                            }
                        }
                    }
                }
                JoinConstraint::Natural | JoinConstraint::None => {}
            }
        }
    }

    fn expr(&mut self, e: &Expr, scope: &Scope<'_>) {
        match e {
            Expr::Identifier(id) => self.bare_column(id, scope),
            Expr::Compound(q, c) => self.qualified_column(q, c, scope),
            Expr::Literal(_) | Expr::Star => {}
            Expr::Unary { expr, .. } | Expr::Cast { expr, .. } | Expr::Collate { expr, .. } => self.expr(expr, scope),
            Expr::IsNull { expr, .. } => self.expr(expr, scope),
            Expr::Binary { left, right, .. } => {
                self.expr(left, scope);
                self.expr(right, scope);
            }
            Expr::Function { args, over, .. } => {
                for a in args {
                    self.expr(a, scope);
                }
                if let Some(w) = over {
                    for p in &w.partition_by {
                        self.expr(p, scope);
                    }
                    for o in &w.order_by {
                        self.expr(&o.expr, scope);
                    }
                }
            }
            Expr::Case { operand, branches, else_result } => {
                if let Some(o) = operand {
                    self.expr(o, scope);
                }
                for (w, t) in branches {
                    self.expr(w, scope);
                    self.expr(t, scope);
                }
                if let Some(x) = else_result {
                    self.expr(x, scope);
                }
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr, scope);
                for x in list {
                    self.expr(x, scope);
                }
            }
            Expr::InSubquery { expr, subquery, .. } => {
                self.expr(expr, scope);
                self.query(subquery, Some(scope));
            }
            Expr::Exists { subquery, .. } | Expr::Subquery(subquery) => {
                self.query(subquery, Some(scope));
            }
            Expr::Between { expr, low, high, .. } => {
                self.expr(expr, scope);
                self.expr(low, scope);
                self.expr(high, scope);
            }
            Expr::Like { expr, pattern, escape, .. } => {
                self.expr(expr, scope);
                self.expr(pattern, scope);
                if let Some(x) = escape {
                    self.expr(x, scope);
                }
            }
            Expr::Tuple(items) => {
                for x in items {
                    self.expr(x, scope);
                }
            }
        }
    }

    fn bare_column(&mut self, id: &Ident, scope: &Scope<'_>) {
        if id.quote.is_none() && ROWID_ALIASES.iter().any(|r| id.matches(r)) {
            return;
        }
        let mut current = Some(scope);
        while let Some(sc) = current {
            let matched: Vec<(&Source, &str)> = sc
                .sources
                .iter()
                .filter_map(|s| s.find_column(&id.value).flatten().map(|c| (s, c)))
                .collect();
            if !matched.is_empty() {
                for (src, col) in matched {
                    if let Some(base) = &src.base {
                        self.out.references.add_column(base, col);
                    }
                }
                return;
            }
            if sc.aliases.iter().any(|a| id.matches(a)) {
                return;
            }
            let unknown: Vec<&Source> = sc.sources.iter().filter(|s| s.columns.is_none()).collect();
            if !unknown.is_empty() {
                // Attribute by elimination when exactly one source has unknown columns.
                match unknown.as_slice() {
                    [only] => {
                        if let Some(base) = only.base.clone() {
                            self.out.references.add_column(&base, &id.value);
                        }
                    }
                    _ => self.out.references.add_column(UNRESOLVED, &id.value),
                }
                return;
            }
            current = sc.parent;
        }
        // SQLite reads an unresolvable double-quoted identifier as a string.
        if id.quote == Some('"') {
            return;
        }
        if self.schema.is_some() {
            let tables = scope.sources.iter().map(|s| s.base.clone().unwrap_or_else(|| s.name.clone())).collect();
            self.problem(ReferenceProblem::UnknownColumn { column: id.value.clone(), tables });
        }
        self.out.references.add_column(UNRESOLVED, &id.value);
    }

    fn qualified_column(&mut self, qualifier: &Ident, column: &Ident, scope: &Scope<'_>) {
        let mut current = Some(scope);
        while let Some(sc) = current {
            if let Some(src) = sc.sources.iter().find(|s| qualifier.matches(&s.name)) {
                match src.find_column(&column.value) {
                    Some(Some(canonical)) => {
                        if let Some(base) = &src.base {
                            self.out.references.add_column(base, canonical);
                        }
                    }
                    Some(None) => {
                        if column.quote.is_none() && ROWID_ALIASES.iter().any(|r| column.matches(r)) {
                            return;
                        }
                        let table = src.base.clone().unwrap_or_else(|| src.name.clone());
                        self.problem(ReferenceProblem::UnknownColumn {
                            column: column.value.clone(),
                            tables: vec![table],
                        });
                        if let Some(base) = &src.base {
                            self.out.references.add_column(base, &column.value);
                        }
                    }
                    None => {
                        if let Some(base) = &src.base {
                            self.out.references.add_column(base, &column.value);
                        }
                    }
                }
                return;
            }
            current = sc.parent;
        }
        self.problem(ReferenceProblem::UnknownQualifier {
            qualifier: qualifier.value.clone(),
            column: column.value.clone(),
        });
        self.out.references.add_column(UNRESOLVED, &column.value);
    }
}
