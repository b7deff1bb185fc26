//! Abstract syntax for the supported SELECT subset, with a serializer
//! that re-parses to a structurally identical tree.
//!
//! The tree is deliberately literal about surface form: literals and
//! quoted identifiers keep their written text, alias style (`as` or bare)
//! is recorded, and parentheses are explicit [`Expr::Paren`] nodes so the
//! rewrite passes can reason about exactly what the author wrote.

use super::lexer::{join_tokens, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectStmt {
    pub distinct: Option<Quantifier>,
    pub columns: Vec<SelectItem>,
    pub from: Option<FromClause>,
    pub where_clause: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<LimitClause>,
    pub semicolon: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Distinct,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectItem {
    Star,
    /// `t.*` (path holds everything before the star).
    TableStar(Vec<String>),
    Expr { expr: Expr, alias: Option<Alias> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alias {
    pub explicit_as: bool,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FromClause {
    pub first: TableRef,
    pub joins: Vec<Join>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Join {
    pub kind: JoinKind,
    pub table: TableRef,
    pub constraint: Option<JoinConstraint>,
}

/// Join connective exactly as written (lowercased), so `left outer join`
/// is not rewritten to `left join`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinKind {
    Comma,
    Keywords(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinConstraint {
    On(Expr),
    Using(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableRef {
    Named {
        path: Vec<String>,
        alias: Option<Alias>,
    },
    Subquery {
        select: Box<SelectStmt>,
        alias: Option<Alias>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub expr: Expr,
    pub direction: Option<Direction>,
    pub nulls: Option<NullsOrder>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullsOrder {
    First,
    Last,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LimitClause {
    pub limit: Expr,
    pub tail: LimitTail,
}

/// `limit n`, `limit n offset m`, or the comma form `limit m, n`,
/// preserved as written because the comma form swaps the roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LimitTail {
    None,
    Offset(Expr),
    Comma(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainOp {
    And,
    Or,
}

impl ChainOp {
    pub fn word(self) -> &'static str {
        match self {
            ChainOp::And => "and",
            ChainOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FuncArgs {
    Star,
    List(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// Number, string, NULL, TRUE/FALSE, CURRENT_* — verbatim token text.
    Literal(String),
    /// Possibly dotted column path; parts keep quoting verbatim.
    Column(Vec<String>),
    Unary {
        op: String,
        expr: Box<Expr>,
    },
    Binary {
        op: String,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    /// Flat same-operator boolean chain: one syntactic level of AND or OR.
    Chain {
        op: ChainOp,
        terms: Vec<Expr>,
    },
    Paren(Box<Expr>),
    Func {
        name: String,
        distinct: bool,
        args: FuncArgs,
    },
    Case {
        operand: Option<Box<Expr>>,
        whens: Vec<(Expr, Expr)>,
        else_expr: Option<Box<Expr>>,
    },
    Cast {
        expr: Box<Expr>,
        type_tokens: Vec<Token>,
    },
    Exists {
        select: Box<SelectStmt>,
    },
    /// Scalar subquery; serializes with its own parentheses.
    Subquery(Box<SelectStmt>),
    InList {
        expr: Box<Expr>,
        negated: bool,
        items: Vec<Expr>,
    },
    InSubquery {
        expr: Box<Expr>,
        negated: bool,
        select: Box<SelectStmt>,
    },
    Between {
        expr: Box<Expr>,
        negated: bool,
        low: Box<Expr>,
        high: Box<Expr>,
    },
    Like {
        expr: Box<Expr>,
        negated: bool,
        op: String,
        pattern: Box<Expr>,
        escape: Option<Box<Expr>>,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    Is {
        left: Box<Expr>,
        negated: bool,
        right: Box<Expr>,
    },
    Collate {
        expr: Box<Expr>,
        collation: String,
    },
}

fn word(s: &str) -> Token {
    Token::Word(s.to_string())
}

fn op(s: &str) -> Token {
    Token::Op(s.to_string())
}

/// Serialize a statement to canonical text.
pub fn serialize(stmt: &SelectStmt) -> String {
    join_tokens(&stmt_tokens(stmt))
}

/// Serialize one expression to canonical text (used as the chain sort key).
pub fn serialize_expr(expr: &Expr) -> String {
    let mut toks = Vec::new();
    expr_tokens(expr, &mut toks);
    join_tokens(&toks)
}

pub fn stmt_tokens(stmt: &SelectStmt) -> Vec<Token> {
    let mut t = Vec::new();
    push_stmt(stmt, &mut t);
    if stmt.semicolon {
        t.push(op(";"));
    }
    t
}

fn push_stmt(stmt: &SelectStmt, t: &mut Vec<Token>) {
    t.push(word("select"));
    match stmt.distinct {
        Some(Quantifier::Distinct) => t.push(word("distinct")),
        Some(Quantifier::All) => t.push(word("all")),
        None => {}
    }
    for (i, item) in stmt.columns.iter().enumerate() {
        if i > 0 {
            t.push(op(","));
        }
        match item {
            SelectItem::Star => t.push(op("*")),
            SelectItem::TableStar(path) => {
                push_path(path, t);
                t.push(op("."));
                t.push(op("*"));
            }
            SelectItem::Expr { expr, alias } => {
                expr_tokens(expr, t);
                push_alias(alias, t);
            }
        }
    }
    if let Some(from) = &stmt.from {
        t.push(word("from"));
        push_table_ref(&from.first, t);
        for join in &from.joins {
            match &join.kind {
                JoinKind::Comma => t.push(op(",")),
                JoinKind::Keywords(words) => {
                    for w in words {
                        t.push(word(w));
                    }
                }
            }
            push_table_ref(&join.table, t);
            match &join.constraint {
                Some(JoinConstraint::On(e)) => {
                    t.push(word("on"));
                    expr_tokens(e, t);
                }
                Some(JoinConstraint::Using(cols)) => {
                    t.push(word("using"));
                    t.push(op("("));
                    for (i, c) in cols.iter().enumerate() {
                        if i > 0 {
                            t.push(op(","));
                        }
                        t.push(word(c));
                    }
                    t.push(op(")"));
                }
                None => {}
            }
        }
    }
    if let Some(w) = &stmt.where_clause {
        t.push(word("where"));
        expr_tokens(w, t);
    }
    if !stmt.group_by.is_empty() {
        t.push(word("group"));
        t.push(word("by"));
        for (i, e) in stmt.group_by.iter().enumerate() {
            if i > 0 {
                t.push(op(","));
            }
            expr_tokens(e, t);
        }
    }
    if let Some(h) = &stmt.having {
        t.push(word("having"));
        expr_tokens(h, t);
    }
    if !stmt.order_by.is_empty() {
        t.push(word("order"));
        t.push(word("by"));
        for (i, item) in stmt.order_by.iter().enumerate() {
            if i > 0 {
                t.push(op(","));
            }
            expr_tokens(&item.expr, t);
            match item.direction {
                Some(Direction::Asc) => t.push(word("asc")),
                Some(Direction::Desc) => t.push(word("desc")),
                None => {}
            }
            if let Some(n) = item.nulls {
                t.push(word("nulls"));
                t.push(word(match n {
                    NullsOrder::First => "first",
                    NullsOrder::Last => "last",
                }));
            }
        }
    }
    if let Some(l) = &stmt.limit {
        t.push(word("limit"));
        expr_tokens(&l.limit, t);
        match &l.tail {
            LimitTail::None => {}
            LimitTail::Offset(e) => {
                t.push(word("offset"));
                expr_tokens(e, t);
            }
            LimitTail::Comma(e) => {
                t.push(op(","));
                expr_tokens(e, t);
            }
        }
    }
}

fn push_path(path: &[String], t: &mut Vec<Token>) {
    for (i, part) in path.iter().enumerate() {
        if i > 0 {
            t.push(op("."));
        }
        t.push(part_token(part));
    }
}

fn part_token(part: &str) -> Token {
    if part.starts_with('"') || part.starts_with('`') || part.starts_with('[') {
        Token::Quoted(part.to_string())
    } else {
        Token::Word(part.to_string())
    }
}

fn push_alias(alias: &Option<Alias>, t: &mut Vec<Token>) {
    if let Some(a) = alias {
        if a.explicit_as {
            t.push(word("as"));
        }
        t.push(part_token(&a.name));
    }
}

fn push_table_ref(table: &TableRef, t: &mut Vec<Token>) {
    match table {
        TableRef::Named { path, alias } => {
            push_path(path, t);
            push_alias(alias, t);
        }
        TableRef::Subquery { select, alias } => {
            t.push(op("("));
            push_stmt(select, t);
            t.push(op(")"));
            push_alias(alias, t);
        }
    }
}

fn literal_token(text: &str) -> Token {
    let first = text.chars().next().unwrap_or('0');
    if first == '\'' {
        Token::Str(text.to_string())
    } else if first.is_ascii_digit() || first == '.' {
        Token::Number(text.to_string())
    } else {
        Token::Word(text.to_string())
    }
}

fn expr_tokens(expr: &Expr, t: &mut Vec<Token>) {
    match expr {
        Expr::Literal(text) => t.push(literal_token(text)),
        Expr::Column(path) => push_path(path, t),
        Expr::Unary { op: o, expr } => {
            if o == "not" {
                t.push(word("not"));
            } else {
                t.push(op(o));
            }
            expr_tokens(expr, t);
        }
        Expr::Binary { op: o, left, right } => {
            expr_tokens(left, t);
            t.push(op(o));
            expr_tokens(right, t);
        }
        Expr::Chain { op: o, terms } => {
            for (i, term) in terms.iter().enumerate() {
                if i > 0 {
                    t.push(word(o.word()));
                }
                expr_tokens(term, t);
            }
        }
        Expr::Paren(inner) => {
            t.push(op("("));
            expr_tokens(inner, t);
            t.push(op(")"));
        }
        Expr::Func {
            name,
            distinct,
            args,
        } => {
            t.push(word(name));
            t.push(op("("));
            if *distinct {
                t.push(word("distinct"));
            }
            match args {
                FuncArgs::Star => t.push(op("*")),
                FuncArgs::List(items) => {
                    for (i, a) in items.iter().enumerate() {
                        if i > 0 {
                            t.push(op(","));
                        }
                        expr_tokens(a, t);
                    }
                }
            }
            t.push(op(")"));
        }
        Expr::Case {
            operand,
            whens,
            else_expr,
        } => {
            t.push(word("case"));
            if let Some(o) = operand {
                expr_tokens(o, t);
            }
            for (cond, result) in whens {
                t.push(word("when"));
                expr_tokens(cond, t);
                t.push(word("then"));
                expr_tokens(result, t);
            }
            if let Some(e) = else_expr {
                t.push(word("else"));
                expr_tokens(e, t);
            }
            t.push(word("end"));
        }
        Expr::Cast { expr, type_tokens } => {
            t.push(word("cast"));
            t.push(op("("));
            expr_tokens(expr, t);
            t.push(word("as"));
            t.extend(type_tokens.iter().cloned());
            t.push(op(")"));
        }
        Expr::Exists { select } => {
            t.push(word("exists"));
            t.push(op("("));
            push_stmt(select, t);
            t.push(op(")"));
        }
        Expr::Subquery(select) => {
            t.push(op("("));
            push_stmt(select, t);
            t.push(op(")"));
        }
        Expr::InList {
            expr,
            negated,
            items,
        } => {
            expr_tokens(expr, t);
            if *negated {
                t.push(word("not"));
            }
            t.push(word("in"));
            t.push(op("("));
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    t.push(op(","));
                }
                expr_tokens(item, t);
            }
            t.push(op(")"));
        }
        Expr::InSubquery {
            expr,
            negated,
            select,
        } => {
            expr_tokens(expr, t);
            if *negated {
                t.push(word("not"));
            }
            t.push(word("in"));
            t.push(op("("));
            push_stmt(select, t);
            t.push(op(")"));
        }
        Expr::Between {
            expr,
            negated,
            low,
            high,
        } => {
            expr_tokens(expr, t);
            if *negated {
                t.push(word("not"));
            }
            t.push(word("between"));
            expr_tokens(low, t);
            t.push(word("and"));
            expr_tokens(high, t);
        }
        Expr::Like {
            expr,
            negated,
            op: o,
            pattern,
            escape,
        } => {
            expr_tokens(expr, t);
            if *negated {
                t.push(word("not"));
            }
            t.push(word(o));
            expr_tokens(pattern, t);
            if let Some(e) = escape {
                t.push(word("escape"));
                expr_tokens(e, t);
            }
        }
        Expr::IsNull { expr, negated } => {
            expr_tokens(expr, t);
            t.push(word("is"));
            if *negated {
                t.push(word("not"));
            }
            t.push(word("null"));
        }
        Expr::Is {
            left,
            negated,
            right,
        } => {
            expr_tokens(left, t);
            t.push(word("is"));
            if *negated {
                t.push(word("not"));
            }
            expr_tokens(right, t);
        }
        Expr::Collate { expr, collation } => {
            expr_tokens(expr, t);
            t.push(word("collate"));
            t.push(part_token(collation));
        }
    }
}
