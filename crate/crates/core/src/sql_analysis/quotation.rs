//! Lexical detection of schema identifiers that need quoting but appear bare.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Mutex, OnceLock};

use regex::{Regex, RegexBuilder};

use crate::schema::DatabaseSchema;

/// Which characters force an identifier to be quoted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SpecialChars {
    /// Anything outside `[A-Za-z0-9_]`; covers space and `/`.
    #[default]
    AnyNonWord,
    /// Only the listed characters.
    Only(Vec<char>),
}

impl SpecialChars {
    pub fn is_special_name(&self, name: &str) -> bool {
        match self {
            SpecialChars::AnyNonWord => name.chars().any(|c| !(c.is_ascii_alphanumeric() || c == '_')),
            SpecialChars::Only(set) => name.chars().any(|c| set.contains(&c)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnquotedIdentifier {
    /// Identifier as stored in the schema.
    pub name: String,
    /// Byte span of the bare occurrence in the SQL text.
    pub span: Range<usize>,
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte ranges covered by string literals and quoted identifiers. Tolerates
/// unterminated quotes (the rest of the text is treated as quoted).
fn quoted_ranges(sql: &str) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    let mut iter = sql.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        let close = match c {
            '\'' | '"' | '`' => c,
            '[' => ']',
            '-' if iter.peek().map(|(_, n)| *n) == Some('-') => {
                // line comment
                let mut end = sql.len();
                for (i, ch) in iter.by_ref() {
                    if ch == '\n' {
                        end = i;
                        break;
                    }
                }
                ranges.push(start..end);
                continue;
            }
            _ => continue,
        };
        let mut end = sql.len();
        while let Some((i, ch)) = iter.next() {
            if ch == close {
                if close != ']' && iter.peek().map(|(_, n)| *n) == Some(close) {
                    iter.next();
                    continue;
                }
                end = i + ch.len_utf8();
                break;
            }
        }
        ranges.push(start..end);
    }
    ranges
}

fn pattern_for(name: &str) -> String {
    let chars: Vec<char> = name.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            out.push_str(r"\s+");
            continue;
        }
        if is_word(c) {
            out.push_str(&regex::escape(&c.to_string()));
        } else {
            if i > 0 {
                out.push_str(r"\s*");
            }
            out.push_str(&regex::escape(&c.to_string()));
            if i + 1 < chars.len() {
                out.push_str(r"\s*");
            }
        }
        i += 1;
    }
    out
}

/// Compiled patterns, keyed by identifier.
fn pattern_cached(name: &str) -> Option<Regex> {
    static CACHE: OnceLock<Mutex<HashMap<String, Option<Regex>>>> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(name.to_string())
        .or_insert_with(|| RegexBuilder::new(&pattern_for(name)).case_insensitive(true).build().ok())
        .clone()
}

/// Find bare occurrences of schema identifiers that contain special characters.
pub fn find_unquoted(sql: &str, schema: &DatabaseSchema, policy: &SpecialChars) -> Vec<UnquotedIdentifier> {
    let mut names: Vec<&str> = Vec::new();
    let all = schema
        .tables
        .iter()
        .flat_map(|t| std::iter::once(t.name.as_str()).chain(t.columns.iter().map(|c| c.name.as_str())));
    for name in all {
        if policy.is_special_name(name) && !names.iter().any(|n| n.eq_ignore_ascii_case(name)) {
            names.push(name);
        }
    }
    if names.is_empty() {
        return Vec::new();
    }
    // Longest first so "free text note" wins over "free text".
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));

    let lowered = sql.to_lowercase();
    let quoted = quoted_ranges(sql);
    let overlaps = |a: &Range<usize>, b: &Range<usize>| a.start < b.end && b.start < a.end;
    let mut found: Vec<UnquotedIdentifier> = Vec::new();
    for name in names {
        // Cheap rejection before compiling a pattern.
        let mut fragments = name.split(|c: char| !is_word(c)).filter(|f| !f.is_empty());
        if !fragments.all(|f| lowered.contains(&f.to_lowercase())) {
            continue;
        }
        let Some(re) = pattern_cached(name) else {
            continue;
        };
        let first_is_word = name.chars().next().is_some_and(is_word);
        let last_is_word = name.chars().last().is_some_and(is_word);
        for m in re.find_iter(sql) {
            let span = m.range();
            if first_is_word && sql[..span.start].chars().next_back().is_some_and(is_word) {
                continue;
            }
            if last_is_word && sql[span.end..].chars().next().is_some_and(is_word) {
                continue;
            }
            if quoted.iter().any(|q| overlaps(q, &span)) || found.iter().any(|f| overlaps(&f.span, &span)) {
                continue;
            }
            found.push(UnquotedIdentifier { name: name.to_string(), span });
        }
    }
    found.sort_by_key(|f| f.span.start);
    found
}

/// Rewrite `sql` with every finding replaced by its double-quoted name.
pub fn apply_quotes(sql: &str, found: &[UnquotedIdentifier]) -> String {
    let mut out = String::with_capacity(sql.len() + found.len() * 2);
    let mut last = 0;
    for f in found {
        out.push_str(&sql[last..f.span.start]);
        out.push('"');
        out.push_str(&f.name.replace('"', "\"\""));
        out.push('"');
        last = f.span.end;
    }
    out.push_str(&sql[last..]);
    out
}
