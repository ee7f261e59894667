//! SQLite-flavoured tokenizer. Tokens keep their byte span in the source so
//! lexical checks can map back onto the original text.

use std::ops::Range;

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Bare or quoted identifier / keyword. `quote` is the opening quote
    /// character (`"`, `` ` `` or `[`) for quoted identifiers.
    Word { value: String, quote: Option<char> },
    Number(String),
    String(String),
    Blob(String),
    Param,
    LParen,
    RParen,
    Comma,
    Dot,
    Semicolon,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Concat,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    BitAnd,
    BitOr,
    ShiftLeft,
    ShiftRight,
    Tilde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word { value, quote: None } if value.eq_ignore_ascii_case(kw))
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Word { value, .. } => format!("'{value}'"),
            TokenKind::Number(n) => n.clone(),
            TokenKind::String(s) => format!("string '{s}'"),
            other => format!("{other:?}"),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || (c as u32) > 0x7f
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$' || (c as u32) > 0x7f
}

pub fn tokenize(sql: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = sql.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map(|(p, _)| *p).unwrap_or(sql.len());
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        let peek = chars.get(i + 1).map(|(_, c)| *c);
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' && peek == Some('-') {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && peek == Some('*') {
            i += 2;
            loop {
                if i + 1 >= chars.len() {
                    return Err(ParseError::new("unterminated block comment", start));
                }
                if chars[i].1 == '*' && chars[i + 1].1 == '/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }

        // Quoted runs: strings, quoted identifiers, blob literals.
        let closing = match c {
            '\'' => Some('\''),
            '"' => Some('"'),
            '`' => Some('`'),
            '[' => Some(']'),
            _ => None,
        };
        let blob = (c == 'x' || c == 'X') && peek == Some('\'');
        if closing.is_some() || blob {
            let (open_idx, close) = if blob { (i + 1, '\'') } else { (i, closing.unwrap()) };
            let mut j = open_idx + 1;
            let mut value = String::new();
            loop {
                let Some(&(_, ch)) = chars.get(j) else {
                    return Err(ParseError::new("unterminated quoted literal", start));
                };
                if ch == close {
                    // Doubled quote escapes itself (not for `[...]`).
                    if close != ']' && chars.get(j + 1).map(|(_, c)| *c) == Some(close) {
                        value.push(close);
                        j += 2;
                        continue;
                    }
                    break;
                }
                value.push(ch);
                j += 1;
            }
            let kind = if blob {
                TokenKind::Blob(value)
            } else if c == '\'' {
                TokenKind::String(value)
            } else {
                TokenKind::Word { value, quote: Some(c) }
            };
            tokens.push(Token { kind, span: start..end_of(j + 1) });
            i = j + 1;
            continue;
        }

        if c.is_ascii_digit() || (c == '.' && peek.is_some_and(|p| p.is_ascii_digit())) {
            let mut j = i;
            if c == '0' && matches!(peek, Some('x') | Some('X')) {
                j += 2;
                while j < chars.len() && chars[j].1.is_ascii_hexdigit() {
                    j += 1;
                }
            } else {
                while j < chars.len() && (chars[j].1.is_ascii_digit() || chars[j].1 == '.') {
                    j += 1;
                }
                if j < chars.len() && matches!(chars[j].1, 'e' | 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && matches!(chars[k].1, '+' | '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].1.is_ascii_digit() {
                        j = k;
                        while j < chars.len() && chars[j].1.is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
            }
            let span = start..end_of(j);
            tokens.push(Token { kind: TokenKind::Number(sql[span.clone()].to_string()), span });
            i = j;
            continue;
        }

        if is_ident_start(c) {
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j].1) {
                j += 1;
            }
            let span = start..end_of(j);
            tokens.push(Token {
                kind: TokenKind::Word { value: sql[span.clone()].to_string(), quote: None },
                span,
            });
            i = j;
            continue;
        }

        let (kind, width) = match (c, peek) {
            ('|', Some('|')) => (TokenKind::Concat, 2),
            ('=', Some('=')) => (TokenKind::Eq, 2),
            ('!', Some('=')) => (TokenKind::NotEq, 2),
            ('<', Some('>')) => (TokenKind::NotEq, 2),
            ('<', Some('=')) => (TokenKind::LtEq, 2),
            ('>', Some('=')) => (TokenKind::GtEq, 2),
            ('<', Some('<')) => (TokenKind::ShiftLeft, 2),
            ('>', Some('>')) => (TokenKind::ShiftRight, 2),
            ('(', _) => (TokenKind::LParen, 1),
            (')', _) => (TokenKind::RParen, 1),
            (',', _) => (TokenKind::Comma, 1),
            ('.', _) => (TokenKind::Dot, 1),
            (';', _) => (TokenKind::Semicolon, 1),
            ('*', _) => (TokenKind::Star, 1),
            ('+', _) => (TokenKind::Plus, 1),
            ('-', _) => (TokenKind::Minus, 1),
            ('/', _) => (TokenKind::Slash, 1),
            ('%', _) => (TokenKind::Percent, 1),
            ('=', _) => (TokenKind::Eq, 1),
            ('<', _) => (TokenKind::Lt, 1),
            ('>', _) => (TokenKind::Gt, 1),
            ('&', _) => (TokenKind::BitAnd, 1),
            ('|', _) => (TokenKind::BitOr, 1),
            ('~', _) => (TokenKind::Tilde, 1),
            ('?', _) => (TokenKind::Param, 1),
            _ => return Err(ParseError::new(format!("unexpected character '{c}'"), start)),
        };
        tokens.push(Token { kind, span: start..end_of(i + width) });
        i += width;
    }
    Ok(tokens)
}

/// Byte ranges of string literals and quoted identifiers.
pub fn quoted_regions(tokens: &[Token]) -> Vec<Range<usize>> {
    tokens
        .iter()
        .filter(|t| {
            matches!(
                t.kind,
                TokenKind::String(_) | TokenKind::Blob(_) | TokenKind::Word { quote: Some(_), .. }
            )
        })
        .map(|t| t.span.clone())
        .collect()
}

/// Whether a top-level `ORDER BY` (outside any parentheses) exists.
pub fn has_top_level_order_by(tokens: &[Token]) -> bool {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::LParen => depth += 1,
            TokenKind::RParen => depth -= 1,
            _ if depth == 0 && t.is_keyword("order") && tokens.get(i + 1).is_some_and(|n| n.is_keyword("by")) => {
                return true;
            }
            _ => {}
        }
    }
    false
}
