//! Recursive-descent parser for SQLite `SELECT` statements.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::ParseError;

/// Keywords that terminate an implicit alias or cannot start an operand.
const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "having", "order", "by", "limit", "offset", "union",
    "intersect", "except", "join", "inner", "left", "right", "full", "outer", "cross", "natural",
    "on", "using", "as", "and", "or", "not", "in", "is", "null", "like", "glob", "match",
    "regexp", "between", "case", "when", "then", "else", "end", "exists", "distinct", "all",
    "asc", "desc", "with", "values", "cast", "collate", "escape", "isnull", "notnull", "window",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Parse a single query statement (trailing semicolons allowed).
pub fn parse_query(sql: &str) -> Result<Query, ParseError> {
    let tokens = tokenize(sql)?;
    let mut p = Parser { tokens, pos: 0, src_len: sql.len() };
    if p.tokens.is_empty() {
        return Err(ParseError::new("empty statement", 0));
    }
    if !(p.peek_kw("select") || p.peek_kw("with") || p.peek_kw("values") || p.peek_is(&TokenKind::LParen)) {
        return Err(p.error_here("only SELECT queries are supported"));
    }
    let query = p.parse_query()?;
    while p.eat(&TokenKind::Semicolon) {}
    if p.pos < p.tokens.len() {
        return Err(p.error_here(&format!("unexpected {} after end of statement", p.tokens[p.pos].describe())));
    }
    Ok(query)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    src_len: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn peek_is(&self, kind: &TokenKind) -> bool {
        self.peek().is_some_and(|t| &t.kind == kind)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn peek_kw_at(&self, offset: usize, kw: &str) -> bool {
        self.peek_at(offset).is_some_and(|t| t.is_keyword(kw))
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_is(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: &str) -> ParseError {
        let position = self.peek().map(|t| t.span.start).unwrap_or(self.src_len);
        ParseError::new(message, position)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(t) => self.error_here(&format!("expected {expected}, found {}", t.describe())),
            None => self.error_here(&format!("expected {expected}, found end of input")),
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> PResult<()> {
        if self.eat(kind) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&kw.to_uppercase()))
        }
    }

    /// Any identifier, including reserved words when quoted.
    fn parse_ident(&mut self) -> PResult<Ident> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Word { value, quote }) if quote.is_some() || !is_reserved(value) => {
                let ident = Ident { value: value.clone(), quote: *quote };
                self.pos += 1;
                Ok(ident)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn parse_optional_alias(&mut self) -> PResult<Option<Ident>> {
        if self.eat_kw("as") {
            if let Some(TokenKind::String(s)) = self.peek().map(|t| &t.kind) {
                let ident = Ident { value: s.clone(), quote: Some('\'') };
                self.pos += 1;
                return Ok(Some(ident));
            }
            return self.parse_ident().map(Some);
        }
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Word { value, quote }) if quote.is_some() || !is_reserved(value) => {
                self.parse_ident().map(Some)
            }
            _ => Ok(None),
        }
    }

    fn parse_query(&mut self) -> PResult<Query> {
        let mut with = Vec::new();
        if self.eat_kw("with") {
            self.eat_kw("recursive");
            loop {
                let name = self.parse_ident()?;
                let mut columns = Vec::new();
                if self.eat(&TokenKind::LParen) {
                    loop {
                        columns.push(self.parse_ident()?);
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                    self.expect(&TokenKind::RParen, "')'")?;
                }
                self.expect_kw("as")?;
                self.expect(&TokenKind::LParen, "'('")?;
                let query = self.parse_query()?;
                self.expect(&TokenKind::RParen, "')'")?;
                with.push(Cte { name, columns, query });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let body = self.parse_set_expr()?;
        let mut order_by = Vec::new();
        if self.peek_kw("order") {
            self.pos += 1;
            self.expect_kw("by")?;
            order_by = self.parse_order_items()?;
        }
        let mut limit = None;
        let mut offset = None;
        if self.eat_kw("limit") {
            let first = self.parse_expr()?;
            if self.eat_kw("offset") {
                limit = Some(first);
                offset = Some(self.parse_expr()?);
            } else if self.eat(&TokenKind::Comma) {
                offset = Some(first);
                limit = Some(self.parse_expr()?);
            } else {
                limit = Some(first);
            }
        }
        Ok(Query { with, body, order_by, limit, offset })
    }

    fn parse_order_items(&mut self) -> PResult<Vec<OrderItem>> {
        let mut items = Vec::new();
        loop {
            let expr = self.parse_expr()?;
            let descending = if self.eat_kw("desc") {
                true
            } else {
                self.eat_kw("asc");
                false
            };
            if self.peek_kw("nulls") {
                self.pos += 1;
                if !(self.eat_kw("first") || self.eat_kw("last")) {
                    return Err(self.unexpected("FIRST or LAST"));
                }
            }
            items.push(OrderItem { expr, descending });
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Ok(items)
    }

    fn parse_set_expr(&mut self) -> PResult<SetExpr> {
        let mut left = self.parse_set_term()?;
        loop {
            let op = if self.eat_kw("union") {
                if self.eat_kw("all") {
                    SetOperator::UnionAll
                } else {
                    SetOperator::Union
                }
            } else if self.eat_kw("intersect") {
                SetOperator::Intersect
            } else if self.eat_kw("except") {
                SetOperator::Except
            } else {
                break;
            };
            let right = self.parse_set_term()?;
            left = SetExpr::SetOperation { op, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn parse_set_term(&mut self) -> PResult<SetExpr> {
        if self.peek_kw("select") {
            return Ok(SetExpr::Select(Box::new(self.parse_select()?)));
        }
        if self.eat_kw("values") {
            let mut rows = Vec::new();
            loop {
                self.expect(&TokenKind::LParen, "'('")?;
                rows.push(self.parse_expr_list()?);
                self.expect(&TokenKind::RParen, "')'")?;
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            return Ok(SetExpr::Values(rows));
        }
        if self.eat(&TokenKind::LParen) {
            let q = self.parse_query()?;
            self.expect(&TokenKind::RParen, "')'")?;
            return Ok(SetExpr::Nested(Box::new(q)));
        }
        Err(self.unexpected("SELECT"))
    }

    fn parse_select(&mut self) -> PResult<Select> {
        self.expect_kw("select")?;
        let distinct = if self.eat_kw("distinct") {
            true
        } else {
            self.eat_kw("all");
            false
        };
        let mut projection = Vec::new();
        loop {
            projection.push(self.parse_select_item()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        let mut from = Vec::new();
        if self.eat_kw("from") {
            loop {
                from.push(self.parse_table_with_joins()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let selection = if self.eat_kw("where") { Some(self.parse_expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.peek_kw("group") {
            self.pos += 1;
            self.expect_kw("by")?;
            group_by = self.parse_expr_list()?;
        }
        let having = if self.eat_kw("having") { Some(self.parse_expr()?) } else { None };
        Ok(Select { distinct, projection, from, selection, group_by, having })
    }

    fn parse_select_item(&mut self) -> PResult<SelectItem> {
        if self.eat(&TokenKind::Star) {
            return Ok(SelectItem::Wildcard);
        }
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Word { .. }))
            && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Dot)
            && self.peek_at(2).is_some_and(|t| t.kind == TokenKind::Star)
        {
            let q = self.parse_ident()?;
            self.pos += 2;
            return Ok(SelectItem::QualifiedWildcard(q));
        }
        let expr = self.parse_expr()?;
        let alias = self.parse_optional_alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn parse_table_with_joins(&mut self) -> PResult<TableWithJoins> {
        let relation = self.parse_table_factor()?;
        let mut joins = Vec::new();
        loop {
            let natural = self.eat_kw("natural");
            let mut saw_join_word = false;
            if self.eat_kw("left") || self.eat_kw("right") || self.eat_kw("full") {
                self.eat_kw("outer");
                saw_join_word = true;
            } else if self.eat_kw("inner") || self.eat_kw("cross") {
                saw_join_word = true;
            }
            if !self.eat_kw("join") {
                if natural || saw_join_word {
                    return Err(self.unexpected("JOIN"));
                }
                break;
            }
            let relation = self.parse_table_factor()?;
            let constraint = if natural {
                JoinConstraint::Natural
            } else if self.eat_kw("on") {
                JoinConstraint::On(self.parse_expr()?)
            } else if self.eat_kw("using") {
                self.expect(&TokenKind::LParen, "'('")?;
                let mut cols = Vec::new();
                loop {
                    cols.push(self.parse_ident()?);
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                self.expect(&TokenKind::RParen, "')'")?;
                JoinConstraint::Using(cols)
            } else {
                JoinConstraint::None
            };
            joins.push(Join { relation, constraint });
        }
        Ok(TableWithJoins { relation, joins })
    }

    fn parse_table_factor(&mut self) -> PResult<TableFactor> {
        if self.eat(&TokenKind::LParen) {
            if self.peek_kw("select") || self.peek_kw("with") || self.peek_kw("values") {
                let subquery = self.parse_query()?;
                self.expect(&TokenKind::RParen, "')'")?;
                let alias = self.parse_optional_alias()?;
                return Ok(TableFactor::Derived { subquery: Box::new(subquery), alias });
            }
            let inner = self.parse_table_with_joins()?;
            self.expect(&TokenKind::RParen, "')'")?;
            self.parse_optional_alias()?;
            return Ok(TableFactor::Nested(Box::new(inner)));
        }
        let mut name = self.parse_ident()?;
        if self.eat(&TokenKind::Dot) {
            name = self.parse_ident()?;
        }
        let alias = self.parse_optional_alias()?;
        if self.peek_kw("indexed") {
            self.pos += 1;
            self.expect_kw("by")?;
            self.parse_ident()?;
        } else if self.peek_kw("not") && self.peek_kw_at(1, "indexed") {
            self.pos += 2;
        }
        Ok(TableFactor::Table { name, alias })
    }

    fn parse_expr_list(&mut self) -> PResult<Vec<Expr>> {
        let mut list = Vec::new();
        loop {
            list.push(self.parse_expr()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Ok(list)
    }

    pub fn parse_expr(&mut self) -> PResult<Expr> {
        let mut left = self.parse_and()?;
        while self.eat_kw("or") {
            let right = self.parse_and()?;
            left = binary(left, "OR", right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> PResult<Expr> {
        let mut left = self.parse_not()?;
        while self.eat_kw("and") {
            let right = self.parse_not()?;
            left = binary(left, "AND", right);
        }
        Ok(left)
    }

    fn parse_not(&mut self) -> PResult<Expr> {
        if self.peek_kw("not") && !self.peek_kw_at(1, "exists") {
            self.pos += 1;
            let expr = self.parse_not()?;
            return Ok(Expr::Unary { op: "NOT".into(), expr: Box::new(expr) });
        }
        self.parse_equality()
    }

    fn parse_equality(&mut self) -> PResult<Expr> {
        let mut left = self.parse_relational()?;
        loop {
            let negated = self.peek_kw("not")
                && (self.peek_kw_at(1, "in")
                    || self.peek_kw_at(1, "like")
                    || self.peek_kw_at(1, "glob")
                    || self.peek_kw_at(1, "match")
                    || self.peek_kw_at(1, "regexp")
                    || self.peek_kw_at(1, "between")
                    || self.peek_kw_at(1, "null"));
            if negated {
                self.pos += 1;
            }
            if self.eat_kw("in") {
                self.expect(&TokenKind::LParen, "'('")?;
                if self.peek_kw("select") || self.peek_kw("with") || self.peek_kw("values") {
                    let subquery = self.parse_query()?;
                    self.expect(&TokenKind::RParen, "')'")?;
                    left = Expr::InSubquery { expr: Box::new(left), subquery: Box::new(subquery), negated };
                } else {
                    let list = if self.peek_is(&TokenKind::RParen) { Vec::new() } else { self.parse_expr_list()? };
                    self.expect(&TokenKind::RParen, "')'")?;
                    left = Expr::InList { expr: Box::new(left), list, negated };
                }
                continue;
            }
            if let Some(op) = ["like", "glob", "match", "regexp"].into_iter().find(|k| self.peek_kw(k)) {
                self.pos += 1;
                let pattern = self.parse_relational()?;
                let escape = if self.eat_kw("escape") { Some(Box::new(self.parse_relational()?)) } else { None };
                left = Expr::Like {
                    expr: Box::new(left),
                    op: op.to_uppercase(),
                    pattern: Box::new(pattern),
                    escape,
                    negated,
                };
                continue;
            }
            if self.eat_kw("between") {
                let low = self.parse_relational()?;
                self.expect_kw("and")?;
                let high = self.parse_relational()?;
                left = Expr::Between { expr: Box::new(left), low: Box::new(low), high: Box::new(high), negated };
                continue;
            }
            if negated && self.eat_kw("null") {
                left = Expr::IsNull { expr: Box::new(left), negated: true };
                continue;
            }
            if negated {
                return Err(self.unexpected("IN, LIKE, BETWEEN or NULL after NOT"));
            }
            if self.eat_kw("isnull") {
                left = Expr::IsNull { expr: Box::new(left), negated: false };
                continue;
            }
            if self.eat_kw("notnull") {
                left = Expr::IsNull { expr: Box::new(left), negated: true };
                continue;
            }
            if self.eat_kw("is") {
                let negated = self.eat_kw("not");
                if self.eat_kw("null") {
                    left = Expr::IsNull { expr: Box::new(left), negated };
                } else {
                    if self.eat_kw("distinct") {
                        self.expect_kw("from")?;
                    }
                    let right = self.parse_relational()?;
                    let op = if negated { "IS NOT" } else { "IS" };
                    left = binary(left, op, right);
                }
                continue;
            }
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Eq) => "=",
                Some(TokenKind::NotEq) => "!=",
                _ => break,
            };
            self.pos += 1;
            let right = self.parse_relational()?;
            left = binary(left, op, right);
        }
        Ok(left)
    }

    fn parse_relational(&mut self) -> PResult<Expr> {
        let mut left = self.parse_bitwise()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Lt) => "<",
                Some(TokenKind::LtEq) => "<=",
                Some(TokenKind::Gt) => ">",
                Some(TokenKind::GtEq) => ">=",
                _ => break,
            };
            self.pos += 1;
            let right = self.parse_bitwise()?;
            left = binary(left, op, right);
        }
        Ok(left)
    }

    fn parse_bitwise(&mut self) -> PResult<Expr> {
        let mut left = self.parse_additive()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::BitAnd) => "&",
                Some(TokenKind::BitOr) => "|",
                Some(TokenKind::ShiftLeft) => "<<",
                Some(TokenKind::ShiftRight) => ">>",
                _ => break,
            };
            self.pos += 1;
            let right = self.parse_additive()?;
            left = binary(left, op, right);
        }
        Ok(left)
    }

    fn parse_additive(&mut self) -> PResult<Expr> {
        let mut left = self.parse_multiplicative()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => "+",
                Some(TokenKind::Minus) => "-",
                _ => break,
            };
            self.pos += 1;
            let right = self.parse_multiplicative()?;
            left = binary(left, op, right);
        }
        Ok(left)
    }

    fn parse_multiplicative(&mut self) -> PResult<Expr> {
        let mut left = self.parse_concat()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Star) => "*",
                Some(TokenKind::Slash) => "/",
                Some(TokenKind::Percent) => "%",
                _ => break,
            };
            self.pos += 1;
            let right = self.parse_concat()?;
            left = binary(left, op, right);
        }
        Ok(left)
    }

    fn parse_concat(&mut self) -> PResult<Expr> {
        let mut left = self.parse_unary()?;
        while self.eat(&TokenKind::Concat) {
            let right = self.parse_unary()?;
            left = binary(left, "||", right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Minus) => Some("-"),
            Some(TokenKind::Plus) => Some("+"),
            Some(TokenKind::Tilde) => Some("~"),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let expr = self.parse_unary()?;
            return Ok(Expr::Unary { op: op.into(), expr: Box::new(expr) });
        }
        let mut expr = self.parse_primary()?;
        while self.eat_kw("collate") {
            let collation = self.parse_ident()?.value;
            expr = Expr::Collate { expr: Box::new(expr), collation };
        }
        Ok(expr)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let Some(token) = self.peek().cloned() else {
            return Err(self.unexpected("expression"));
        };
        match token.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Number(n)))
            }
            TokenKind::String(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::String(s)))
            }
            TokenKind::Blob(b) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Blob(b)))
            }
            TokenKind::Param => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Param))
            }
            TokenKind::LParen => {
                self.pos += 1;
                if self.peek_kw("select") || self.peek_kw("with") || self.peek_kw("values") {
                    let q = self.parse_query()?;
                    self.expect(&TokenKind::RParen, "')'")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let mut list = self.parse_expr_list()?;
                self.expect(&TokenKind::RParen, "')'")?;
                Ok(if list.len() == 1 { list.remove(0) } else { Expr::Tuple(list) })
            }
            TokenKind::Word { ref value, quote } => {
                if quote.is_none() {
                    let lower = value.to_ascii_lowercase();
                    match lower.as_str() {
                        "null" => {
                            self.pos += 1;
                            return Ok(Expr::Literal(Literal::Null));
                        }
                        "true" | "false" => {
                            self.pos += 1;
                            return Ok(Expr::Literal(Literal::Boolean(lower == "true")));
                        }
                        "current_date" | "current_time" | "current_timestamp" => {
                            self.pos += 1;
                            return Ok(Expr::Literal(Literal::CurrentTime(lower)));
                        }
                        "case" => return self.parse_case(),
                        "cast" => return self.parse_cast(),
                        "exists" => {
                            self.pos += 1;
                            return self.parse_exists(false);
                        }
                        "not" if self.peek_kw_at(1, "exists") => {
                            self.pos += 2;
                            return self.parse_exists(true);
                        }
                        _ => {}
                    }
                }
                if self.peek_at(1).is_some_and(|t| t.kind == TokenKind::LParen)
                    && (quote.is_none() && !is_reserved(value) || matches!(value.to_ascii_lowercase().as_str(), "like" | "glob" | "match" | "regexp"))
                {
                    return self.parse_function(value.clone());
                }
                let first = self.parse_ident()?;
                if self.eat(&TokenKind::Dot) {
                    let second = self.parse_ident()?;
                    if self.eat(&TokenKind::Dot) {
                        let third = self.parse_ident()?;
                        return Ok(Expr::Compound(second, third));
                    }
                    return Ok(Expr::Compound(first, second));
                }
                Ok(Expr::Identifier(first))
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn parse_exists(&mut self, negated: bool) -> PResult<Expr> {
        self.expect(&TokenKind::LParen, "'('")?;
        let q = self.parse_query()?;
        self.expect(&TokenKind::RParen, "')'")?;
        Ok(Expr::Exists { subquery: Box::new(q), negated })
    }

    fn parse_function(&mut self, name: String) -> PResult<Expr> {
        self.pos += 2;
        let mut distinct = false;
        let mut args = Vec::new();
        if self.eat(&TokenKind::Star) {
            args.push(Expr::Star);
        } else if !self.peek_is(&TokenKind::RParen) {
            distinct = self.eat_kw("distinct");
            args = self.parse_expr_list()?;
        }
        self.expect(&TokenKind::RParen, "')'")?;
        if self.peek_kw("filter") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::LParen) {
            self.pos += 2;
            self.expect_kw("where")?;
            args.push(self.parse_expr()?);
            self.expect(&TokenKind::RParen, "')'")?;
        }
        let mut over = None;
        if self.eat_kw("over") {
            if self.eat(&TokenKind::LParen) {
                let mut spec = WindowSpec { partition_by: Vec::new(), order_by: Vec::new() };
                if self.peek_kw("partition") {
                    self.pos += 1;
                    self.expect_kw("by")?;
                    spec.partition_by = self.parse_expr_list()?;
                }
                if self.peek_kw("order") {
                    self.pos += 1;
                    self.expect_kw("by")?;
                    spec.order_by = self.parse_order_items()?;
                }
                // Frame clauses carry no column references; skip to ')'.
                let mut depth = 0;
                while let Some(t) = self.peek() {
                    match t.kind {
                        TokenKind::LParen => depth += 1,
                        TokenKind::RParen if depth == 0 => break,
                        TokenKind::RParen => depth -= 1,
                        _ => {}
                    }
                    self.pos += 1;
                }
                self.expect(&TokenKind::RParen, "')'")?;
                over = Some(spec);
            } else {
                self.parse_ident()?;
                over = Some(WindowSpec { partition_by: Vec::new(), order_by: Vec::new() });
            }
        }
        Ok(Expr::Function { name, distinct, args, over })
    }

    fn parse_case(&mut self) -> PResult<Expr> {
        self.pos += 1;
        let operand = if self.peek_kw("when") { None } else { Some(Box::new(self.parse_expr()?)) };
        let mut branches = Vec::new();
        while self.eat_kw("when") {
            let cond = self.parse_expr()?;
            self.expect_kw("then")?;
            let result = self.parse_expr()?;
            branches.push((cond, result));
        }
        if branches.is_empty() {
            return Err(self.unexpected("WHEN"));
        }
        let else_result = if self.eat_kw("else") { Some(Box::new(self.parse_expr()?)) } else { None };
        self.expect_kw("end")?;
        Ok(Expr::Case { operand, branches, else_result })
    }

    fn parse_cast(&mut self) -> PResult<Expr> {
        self.pos += 1;
        self.expect(&TokenKind::LParen, "'('")?;
        let expr = self.parse_expr()?;
        self.expect_kw("as")?;
        let mut type_words = Vec::new();
        while let Some(TokenKind::Word { value, .. }) = self.peek().map(|t| &t.kind) {
            type_words.push(value.clone());
            self.pos += 1;
        }
        if self.eat(&TokenKind::LParen) {
            while !self.peek_is(&TokenKind::RParen) && self.peek().is_some() {
                self.pos += 1;
            }
            self.expect(&TokenKind::RParen, "')'")?;
        }
        if type_words.is_empty() {
            return Err(self.unexpected("type name"));
        }
        self.expect(&TokenKind::RParen, "')'")?;
        Ok(Expr::Cast { expr: Box::new(expr), type_name: type_words.join(" ") })
    }
}

fn binary(left: Expr, op: &str, right: Expr) -> Expr {
    Expr::Binary { left: Box::new(left), op: op.into(), right: Box::new(right) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(sql: &str) -> Query {
        parse_query(sql).unwrap_or_else(|e| panic!("{sql}: {e}"))
    }

    #[test]
    fn parses_spider_style_queries() {
        for sql in [
            "SELECT count(*) FROM singer",
            "SELECT min(player.hs) ,   tryout.ppos FROM tryout JOIN player ON tryout.pid  =  player.pid GROUP BY tryout.ppos",
            "SELECT T2.Name, count(*) FROM concert AS T1 JOIN stadium AS T2 ON T1.Stadium_ID = T2.Stadium_ID GROUP BY T1.Stadium_ID",
            "SELECT name FROM stadium WHERE stadium_id NOT IN (SELECT stadium_id FROM concert)",
            "SELECT StuID FROM Student EXCEPT SELECT StuID FROM Has_Pet",
            "SELECT a FROM t WHERE b BETWEEN 1 AND 5 AND c LIKE 'x%' ORDER BY a DESC LIMIT 3",
            "SELECT CASE WHEN a > 1 THEN 'x' ELSE 'y' END, CAST(b AS REAL) FROM t",
            "WITH c AS (SELECT a FROM t) SELECT * FROM c",
            "SELECT * FROM (SELECT a, b FROM t) AS sub WHERE sub.a IS NOT NULL",
            "SELECT t.* FROM t, u WHERE NOT EXISTS (SELECT 1 FROM v WHERE v.x = t.x);",
            "SELECT rank() OVER (PARTITION BY a ORDER BY b DESC) FROM t",
            "SELECT a FROM t LIMIT 2, 5",
            "SELECT \"free text\" FROM stops WHERE \"route/line\" = 'A1'",
            "SELECT 1 WHERE 0",
            "VALUES (1, 2), (3, 4)",
        ] {
            ok(sql);
        }
    }

    #[test]
    fn implicit_alias_swallows_second_word() {
        let q = ok("SELECT free text FROM stops");
        let SetExpr::Select(sel) = q.body else { panic!() };
        match &sel.projection[0] {
            SelectItem::Expr { expr: Expr::Identifier(i), alias: Some(a) } => {
                assert_eq!(i.value, "free");
                assert_eq!(a.value, "text");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_query("SELECT FROM t").unwrap_err();
        assert_eq!(err.position, Some(7));
        let err = parse_query("SELECT a FROM t WHERE").unwrap_err();
        assert_eq!(err.position, Some(21));
        assert!(parse_query("SELECT a FROM t t2 t3").is_err());
        assert!(parse_query("DELETE FROM t").is_err());
        assert!(parse_query("SELECT a FROM t; SELECT b FROM t").is_err());
        assert!(parse_query("").is_err());
        assert!(parse_query("SELECT (a FROM t").is_err());
    }

    #[test]
    fn precedence_between_and() {
        let q = ok("SELECT a FROM t WHERE a BETWEEN 1 AND 2 AND b = 3");
        let SetExpr::Select(sel) = q.body else { panic!() };
        match sel.selection.unwrap() {
            Expr::Binary { op, left, .. } => {
                assert_eq!(op, "AND");
                assert!(matches!(*left, Expr::Between { .. }));
            }
            other => panic!("{other:?}"),
        }
    }
}
