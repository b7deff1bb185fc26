//! Recursive-descent parser for the supported SELECT subset.
//!
//! Keyword matching is case-insensitive so the parser also works on raw
//! (pre-pipeline) SQL, which the execution module uses to detect ORDER BY.
//! Anything outside the subset is a parse error, which the caller treats
//! as the degraded canonicalization mode rather than a failure.

use super::ast::*;
use super::lexer::Token;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

type PResult<T> = std::result::Result<T, ParseError>;

/// Words that terminate an alias-less expression in item or table
/// position. A bare word in alias slot that is one of these starts the
/// next clause instead.
const ALIAS_STOP: &[&str] = &[
    "from", "where", "group", "having", "order", "limit", "offset", "on", "using", "join",
    "inner", "left", "right", "full", "outer", "cross", "natural", "union", "intersect",
    "except", "as", "when", "then", "else", "end", "and", "or", "not", "in", "between", "like",
    "glob", "regexp", "match", "escape", "is", "collate", "asc", "desc",
];

pub fn parse(tokens: &[Token]) -> PResult<SelectStmt> {
    let mut p = Parser { tokens, pos: 0 };
    let stmt = p.select_stmt(true)?;
    if p.pos != p.tokens.len() {
        return Err(p.err("trailing tokens after statement"));
    }
    Ok(stmt)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn cur(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek(&self, ahead: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + ahead)
    }

    fn advance(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.cur(), Some(Token::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn at_kw_ahead(&self, ahead: usize, kw: &str) -> bool {
        matches!(self.peek(ahead), Some(Token::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected {kw}")))
        }
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.cur(), Some(Token::Op(o)) if o == op)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.err(format!("expected {op:?}")))
        }
    }

    fn select_stmt(&mut self, top_level: bool) -> PResult<SelectStmt> {
        self.expect_kw("select")?;
        let distinct = if self.eat_kw("distinct") {
            Some(Quantifier::Distinct)
        } else if self.eat_kw("all") {
            Some(Quantifier::All)
        } else {
            None
        };
        let mut columns = vec![self.select_item()?];
        while self.eat_op(",") {
            columns.push(self.select_item()?);
        }
        let from = if self.eat_kw("from") {
            Some(self.table_and_joins()?)
        } else {
            None
        };
        let where_clause = if self.eat_kw("where") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            group_by.push(self.expr()?);
            while self.eat_op(",") {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_kw("having") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut order_by = Vec::new();
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            order_by.push(self.order_item()?);
            while self.eat_op(",") {
                order_by.push(self.order_item()?);
            }
        }
        let limit = if self.eat_kw("limit") {
            let limit = self.expr()?;
            let tail = if self.eat_kw("offset") {
                LimitTail::Offset(self.expr()?)
            } else if self.eat_op(",") {
                LimitTail::Comma(self.expr()?)
            } else {
                LimitTail::None
            };
            Some(LimitClause { limit, tail })
        } else {
            None
        };
        let semicolon = top_level && self.eat_op(";");
        Ok(SelectStmt {
            distinct,
            columns,
            from,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
            semicolon,
        })
    }

    fn select_item(&mut self) -> PResult<SelectItem> {
        if self.eat_op("*") {
            return Ok(SelectItem::Star);
        }
        if let Some(parts) = self.try_table_star() {
            return Ok(SelectItem::TableStar(parts));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    /// Lookahead for `path.*`; leaves the position untouched on failure.
    fn try_table_star(&mut self) -> Option<Vec<String>> {
        let save = self.pos;
        let mut parts = Vec::new();
        loop {
            match self.cur() {
                Some(Token::Word(w)) if !parts.is_empty() || !is_reserved_here(w) => {
                    parts.push(w.clone());
                }
                Some(Token::Quoted(q)) => parts.push(q.clone()),
                _ => break,
            }
            self.pos += 1;
            if !self.eat_op(".") {
                break;
            }
            if self.at_op("*") {
                self.pos += 1;
                return Some(parts);
            }
        }
        self.pos = save;
        None
    }

    fn alias(&mut self) -> PResult<Option<Alias>> {
        if self.eat_kw("as") {
            let name = match self.advance() {
                Some(Token::Word(w)) => w.clone(),
                Some(Token::Quoted(q)) => q.clone(),
                _ => return Err(self.err("expected alias name after as")),
            };
            return Ok(Some(Alias {
                explicit_as: true,
                name,
            }));
        }
        match self.cur() {
            Some(Token::Word(w)) if !is_reserved_here(w) => {
                self.pos += 1;
                Ok(Some(Alias {
                    explicit_as: false,
                    name: w.clone(),
                }))
            }
            Some(Token::Quoted(q)) => {
                self.pos += 1;
                Ok(Some(Alias {
                    explicit_as: false,
                    name: q.clone(),
                }))
            }
            _ => Ok(None),
        }
    }

    fn table_and_joins(&mut self) -> PResult<FromClause> {
        let first = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            let kind = if self.eat_op(",") {
                JoinKind::Comma
            } else if let Some(words) = self.join_keywords()? {
                JoinKind::Keywords(words)
            } else {
                break;
            };
            let table = self.table_ref()?;
            let constraint = if self.eat_kw("on") {
                Some(JoinConstraint::On(self.expr()?))
            } else if self.eat_kw("using") {
                self.expect_op("(")?;
                let mut cols = Vec::new();
                if !self.at_op(")") {
                    loop {
                        match self.advance() {
                            Some(Token::Word(w)) => cols.push(w.clone()),
                            _ => return Err(self.err("expected column name in using list")),
                        }
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                }
                self.expect_op(")")?;
                Some(JoinConstraint::Using(cols))
            } else {
                None
            };
            joins.push(Join {
                kind,
                table,
                constraint,
            });
        }
        Ok(FromClause { first, joins })
    }

    fn join_keywords(&mut self) -> PResult<Option<Vec<String>>> {
        let mut words = Vec::new();
        if self.at_kw("natural") {
            words.push("natural".to_string());
            self.pos += 1;
        }
        for kw in ["inner", "cross"] {
            if self.at_kw(kw) {
                words.push(kw.to_string());
                self.pos += 1;
                self.expect_kw("join")?;
                words.push("join".to_string());
                return Ok(Some(words));
            }
        }
        for kw in ["left", "right", "full"] {
            if self.at_kw(kw) {
                words.push(kw.to_string());
                self.pos += 1;
                if self.eat_kw("outer") {
                    words.push("outer".to_string());
                }
                self.expect_kw("join")?;
                words.push("join".to_string());
                return Ok(Some(words));
            }
        }
        if self.at_kw("join") {
            words.push("join".to_string());
            self.pos += 1;
            return Ok(Some(words));
        }
        if words.is_empty() {
            Ok(None)
        } else {
            Err(self.err("natural must be followed by a join"))
        }
    }

    fn table_ref(&mut self) -> PResult<TableRef> {
        if self.eat_op("(") {
            if !self.at_kw("select") {
                return Err(self.err("only subqueries may be parenthesized in from"));
            }
            let select = Box::new(self.select_stmt(false)?);
            self.expect_op(")")?;
            let alias = self.alias()?;
            return Ok(TableRef::Subquery { select, alias });
        }
        let path = self.name_path()?;
        let alias = self.alias()?;
        Ok(TableRef::Named { path, alias })
    }

    fn name_path(&mut self) -> PResult<Vec<String>> {
        let mut parts = Vec::new();
        loop {
            match self.advance() {
                Some(Token::Word(w)) => parts.push(w.clone()),
                Some(Token::Quoted(q)) => parts.push(q.clone()),
                _ => return Err(self.err("expected name")),
            }
            if !self.eat_op(".") {
                return Ok(parts);
            }
        }
    }

    fn order_item(&mut self) -> PResult<OrderItem> {
        let expr = self.expr()?;
        let direction = if self.eat_kw("asc") {
            Some(Direction::Asc)
        } else if self.eat_kw("desc") {
            Some(Direction::Desc)
        } else {
            None
        };
        let nulls = if self.eat_kw("nulls") {
            if self.eat_kw("first") {
                Some(NullsOrder::First)
            } else if self.eat_kw("last") {
                Some(NullsOrder::Last)
            } else {
                return Err(self.err("expected first or last after nulls"));
            }
        } else {
            None
        };
        Ok(OrderItem {
            expr,
            direction,
            nulls,
        })
    }

    pub(super) fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let first = self.and_expr()?;
        if !self.at_kw("or") {
            return Ok(first);
        }
        let mut terms = vec![first];
        while self.eat_kw("or") {
            terms.push(self.and_expr()?);
        }
        Ok(Expr::Chain {
            op: ChainOp::Or,
            terms,
        })
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let first = self.not_expr()?;
        if !self.at_kw("and") {
            return Ok(first);
        }
        let mut terms = vec![first];
        while self.eat_kw("and") {
            terms.push(self.not_expr()?);
        }
        Ok(Expr::Chain {
            op: ChainOp::And,
            terms,
        })
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.at_kw("not") && !self.at_kw_ahead(1, "exists") {
            self.pos += 1;
            let expr = Box::new(self.not_expr()?);
            return Ok(Expr::Unary {
                op: "not".to_string(),
                expr,
            });
        }
        self.eq_expr()
    }

    fn eq_expr(&mut self) -> PResult<Expr> {
        let mut left = self.rel_expr()?;
        loop {
            if let Some(op) = self.eat_any_op(&["=", "==", "!=", "<>"]) {
                let right = self.rel_expr()?;
                left = Expr::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                };
                continue;
            }
            if self.at_kw("is") {
                self.pos += 1;
                let negated = self.eat_kw("not");
                if self.at_kw("null") {
                    self.pos += 1;
                    left = Expr::IsNull {
                        expr: Box::new(left),
                        negated,
                    };
                } else {
                    let right = self.rel_expr()?;
                    left = Expr::Is {
                        left: Box::new(left),
                        negated,
                        right: Box::new(right),
                    };
                }
                continue;
            }
            let negated = if self.at_kw("not")
                && (self.at_kw_ahead(1, "in")
                    || self.at_kw_ahead(1, "between")
                    || self.at_kw_ahead(1, "like")
                    || self.at_kw_ahead(1, "glob")
                    || self.at_kw_ahead(1, "regexp")
                    || self.at_kw_ahead(1, "match"))
            {
                self.pos += 1;
                true
            } else {
                false
            };
            if self.eat_kw("in") {
                self.expect_op("(")?;
                if self.at_kw("select") {
                    let select = Box::new(self.select_stmt(false)?);
                    self.expect_op(")")?;
                    left = Expr::InSubquery {
                        expr: Box::new(left),
                        negated,
                        select,
                    };
                } else {
                    let mut items = Vec::new();
                    if !self.at_op(")") {
                        items.push(self.expr()?);
                        while self.eat_op(",") {
                            items.push(self.expr()?);
                        }
                    }
                    self.expect_op(")")?;
                    left = Expr::InList {
                        expr: Box::new(left),
                        negated,
                        items,
                    };
                }
                continue;
            }
            if self.eat_kw("between") {
                let low = Box::new(self.rel_expr()?);
                self.expect_kw("and")?;
                let high = Box::new(self.rel_expr()?);
                left = Expr::Between {
                    expr: Box::new(left),
                    negated,
                    low,
                    high,
                };
                continue;
            }
            let mut matched_like = false;
            for opkw in ["like", "glob", "regexp", "match"] {
                if self.at_kw(opkw) {
                    self.pos += 1;
                    let pattern = Box::new(self.rel_expr()?);
                    let escape = if self.eat_kw("escape") {
                        Some(Box::new(self.rel_expr()?))
                    } else {
                        None
                    };
                    left = Expr::Like {
                        expr: Box::new(left),
                        negated,
                        op: opkw.to_string(),
                        pattern,
                        escape,
                    };
                    matched_like = true;
                    break;
                }
            }
            if matched_like {
                continue;
            }
            if negated {
                return Err(self.err("dangling not"));
            }
            return Ok(left);
        }
    }

    fn rel_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["<", "<=", ">", ">="], Self::bit_expr)
    }

    fn bit_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["<<", ">>", "&", "|"], Self::add_expr)
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["+", "-"], Self::mul_expr)
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["*", "/", "%"], Self::concat_expr)
    }

    fn concat_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&["||"], Self::unary_expr)
    }

    fn binary_level(
        &mut self,
        ops: &[&str],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut left = next(self)?;
        while let Some(op) = self.eat_any_op(ops) {
            let right = next(self)?;
            left = Expr::Binary {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn eat_any_op(&mut self, ops: &[&str]) -> Option<String> {
        match self.cur() {
            Some(Token::Op(o)) if ops.contains(&o.as_str()) => {
                self.pos += 1;
                Some(o.clone())
            }
            _ => None,
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if let Some(op) = self.eat_any_op(&["-", "+", "~"]) {
            let expr = Box::new(self.unary_expr()?);
            return Ok(Expr::Unary { op, expr });
        }
        self.postfix_expr()
    }

    fn postfix_expr(&mut self) -> PResult<Expr> {
        let mut expr = self.primary()?;
        while self.at_kw("collate") {
            self.pos += 1;
            let collation = match self.advance() {
                Some(Token::Word(w)) => w.clone(),
                Some(Token::Quoted(q)) => q.clone(),
                _ => return Err(self.err("expected collation name")),
            };
            expr = Expr::Collate {
                expr: Box::new(expr),
                collation,
            };
        }
        Ok(expr)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.cur() {
            Some(Token::Number(n)) => {
                let n = n.clone();
                self.pos += 1;
                Ok(Expr::Literal(n))
            }
            Some(Token::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(Expr::Literal(s))
            }
            Some(Token::Op(o)) if o == "(" => {
                self.pos += 1;
                if self.at_kw("select") {
                    let select = Box::new(self.select_stmt(false)?);
                    self.expect_op(")")?;
                    return Ok(Expr::Subquery(select));
                }
                let inner = self.expr()?;
                self.expect_op(")")?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            Some(Token::Word(w)) => {
                let lower = w.to_ascii_lowercase();
                match lower.as_str() {
                    "null" | "true" | "false" | "current_date" | "current_time"
                    | "current_timestamp" => {
                        let raw = w.clone();
                        self.pos += 1;
                        Ok(Expr::Literal(raw))
                    }
                    "case" => self.case_expr(),
                    "cast" => self.cast_expr(),
                    "exists" => {
                        self.pos += 1;
                        self.expect_op("(")?;
                        if !self.at_kw("select") {
                            return Err(self.err("expected select after exists ("));
                        }
                        let select = Box::new(self.select_stmt(false)?);
                        self.expect_op(")")?;
                        Ok(Expr::Exists { select })
                    }
                    "not" => {
                        // Only reachable as `not exists`; bare not was
                        // consumed at the boolean level.
                        self.pos += 1;
                        let inner = self.primary()?;
                        match inner {
                            Expr::Exists { .. } => Ok(Expr::Unary {
                                op: "not".to_string(),
                                expr: Box::new(inner),
                            }),
                            _ => Err(self.err("unexpected not")),
                        }
                    }
                    _ => {
                        if matches!(self.peek(1), Some(Token::Op(o)) if o == "(") {
                            return self.func_call();
                        }
                        let path = self.column_path()?;
                        Ok(Expr::Column(path))
                    }
                }
            }
            Some(Token::Quoted(_)) => {
                let path = self.column_path()?;
                Ok(Expr::Column(path))
            }
            _ => Err(self.err("expected expression")),
        }
    }

    fn column_path(&mut self) -> PResult<Vec<String>> {
        let mut parts = Vec::new();
        loop {
            match self.advance() {
                Some(Token::Word(w)) => parts.push(w.clone()),
                Some(Token::Quoted(q)) => parts.push(q.clone()),
                _ => return Err(self.err("expected column name")),
            }
            if !self.eat_op(".") {
                return Ok(parts);
            }
        }
    }

    fn func_call(&mut self) -> PResult<Expr> {
        let name = match self.advance() {
            Some(Token::Word(w)) => w.clone(),
            _ => return Err(self.err("expected function name")),
        };
        self.expect_op("(")?;
        if self.eat_op("*") {
            self.expect_op(")")?;
            return Ok(Expr::Func {
                name,
                distinct: false,
                args: FuncArgs::Star,
            });
        }
        let distinct = self.eat_kw("distinct");
        let mut items = Vec::new();
        if !self.at_op(")") {
            items.push(self.expr()?);
            while self.eat_op(",") {
                items.push(self.expr()?);
            }
        } else if distinct {
            return Err(self.err("distinct requires an argument"));
        }
        self.expect_op(")")?;
        Ok(Expr::Func {
            name,
            distinct,
            args: FuncArgs::List(items),
        })
    }

    fn case_expr(&mut self) -> PResult<Expr> {
        self.expect_kw("case")?;
        let operand = if self.at_kw("when") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let mut whens = Vec::new();
        while self.eat_kw("when") {
            let cond = self.expr()?;
            self.expect_kw("then")?;
            let result = self.expr()?;
            whens.push((cond, result));
        }
        if whens.is_empty() {
            return Err(self.err("case requires at least one when"));
        }
        let else_expr = if self.eat_kw("else") {
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        self.expect_kw("end")?;
        Ok(Expr::Case {
            operand,
            whens,
            else_expr,
        })
    }

    fn cast_expr(&mut self) -> PResult<Expr> {
        self.expect_kw("cast")?;
        self.expect_op("(")?;
        let expr = Box::new(self.expr()?);
        self.expect_kw("as")?;
        let mut type_tokens = Vec::new();
        let mut depth = 0usize;
        loop {
            match self.cur() {
                Some(Token::Op(o)) if o == "(" => depth += 1,
                Some(Token::Op(o)) if o == ")" => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                Some(_) => {}
                None => return Err(self.err("unterminated cast")),
            }
            type_tokens.push(self.advance().unwrap().clone());
        }
        self.expect_op(")")?;
        if type_tokens.is_empty() {
            return Err(self.err("cast requires a type name"));
        }
        Ok(Expr::Cast { expr, type_tokens })
    }
}

fn is_reserved_here(word: &str) -> bool {
    ALIAS_STOP.contains(&word.to_ascii_lowercase().as_str())
}
