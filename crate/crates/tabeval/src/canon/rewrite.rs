//! AST rewrites: redundant-parenthesis removal and flat boolean chain
//! ordering.
//!
//! Both passes are deliberately conservative. They never descend into
//! subqueries, never re-associate boolean structure, and never touch JOIN
//! order. Parentheses drop only where the enclosed expression already
//! binds at least as tightly as the position requires, with one extra
//! rule: explicit grouping of an AND/OR chain inside another chain is
//! always kept, even when precedence alone would allow removal.

use super::ast::*;

fn binary_power(op: &str) -> u8 {
    match op {
        "=" | "==" | "!=" | "<>" => 4,
        "<" | "<=" | ">" | ">=" => 5,
        "<<" | ">>" | "&" | "|" => 6,
        "+" | "-" => 7,
        "*" | "/" | "%" => 8,
        "||" => 9,
        _ => 4,
    }
}

/// Binding power of a fully built node. Higher binds tighter.
fn power(e: &Expr) -> u8 {
    match e {
        Expr::Chain {
            op: ChainOp::Or, ..
        } => 1,
        Expr::Chain {
            op: ChainOp::And, ..
        } => 2,
        Expr::Unary { op, .. } if op == "not" => 3,
        Expr::Binary { op, .. } => binary_power(op),
        Expr::Is { .. }
        | Expr::IsNull { .. }
        | Expr::InList { .. }
        | Expr::InSubquery { .. }
        | Expr::Between { .. }
        | Expr::Like { .. } => 4,
        Expr::Unary { .. } => 10,
        Expr::Collate { .. } => 11,
        _ => u8::MAX,
    }
}

/// Remove parentheses that are redundant under the precedence rules.
pub fn remove_redundant_parens(stmt: SelectStmt) -> SelectStmt {
    map_stmt_exprs(stmt, &|e| reduce(e, 0, false))
}

/// Sort each maximal flat AND chain and OR chain in the statement's own
/// WHERE clause by the lexicographic byte order of each condition's
/// canonical serialization. Inner chains sort before the chains that
/// contain them, so outer sort keys see settled text.
pub fn sort_flat_chains(mut stmt: SelectStmt) -> SelectStmt {
    stmt.where_clause = stmt.where_clause.map(sort_expr);
    stmt
}

fn reduce(e: Expr, need: u8, in_bool_chain: bool) -> Expr {
    match e {
        Expr::Paren(inner) => {
            let reduced = reduce(*inner, 0, false);
            let keep_grouping = in_bool_chain && matches!(reduced, Expr::Chain { .. });
            if !keep_grouping && power(&reduced) >= need {
                reduced
            } else {
                Expr::Paren(Box::new(reduced))
            }
        }
        Expr::Chain { op, terms } => {
            let term_need = match op {
                ChainOp::Or => 2,
                ChainOp::And => 3,
            };
            Expr::Chain {
                op,
                terms: terms
                    .into_iter()
                    .map(|t| reduce(t, term_need, true))
                    .collect(),
            }
        }
        Expr::Unary { op, expr } => {
            let operand_need = if op == "not" { 4 } else { 10 };
            Expr::Unary {
                op,
                expr: Box::new(reduce(*expr, operand_need, false)),
            }
        }
        Expr::Binary { op, left, right } => {
            let p = binary_power(&op);
            Expr::Binary {
                op,
                left: Box::new(reduce(*left, p, false)),
                right: Box::new(reduce(*right, p + 1, false)),
            }
        }
        Expr::Is {
            left,
            negated,
            right,
        } => Expr::Is {
            left: Box::new(reduce(*left, 4, false)),
            negated,
            right: Box::new(reduce(*right, 5, false)),
        },
        Expr::IsNull { expr, negated } => Expr::IsNull {
            expr: Box::new(reduce(*expr, 4, false)),
            negated,
        },
        Expr::Between {
            expr,
            negated,
            low,
            high,
        } => Expr::Between {
            expr: Box::new(reduce(*expr, 4, false)),
            negated,
            low: Box::new(reduce(*low, 5, false)),
            high: Box::new(reduce(*high, 5, false)),
        },
        Expr::Like {
            expr,
            negated,
            op,
            pattern,
            escape,
        } => Expr::Like {
            expr: Box::new(reduce(*expr, 4, false)),
            negated,
            op,
            pattern: Box::new(reduce(*pattern, 5, false)),
            escape: escape.map(|e| Box::new(reduce(*e, 5, false))),
        },
        Expr::InList {
            expr,
            negated,
            items,
        } => Expr::InList {
            expr: Box::new(reduce(*expr, 4, false)),
            negated,
            items: items.into_iter().map(|i| reduce(i, 0, false)).collect(),
        },
        Expr::InSubquery {
            expr,
            negated,
            select,
        } => Expr::InSubquery {
            expr: Box::new(reduce(*expr, 4, false)),
            negated,
            select,
        },
        Expr::Collate { expr, collation } => Expr::Collate {
            expr: Box::new(reduce(*expr, 11, false)),
            collation,
        },
        Expr::Func {
            name,
            distinct,
            args,
        } => Expr::Func {
            name,
            distinct,
            args: match args {
                FuncArgs::Star => FuncArgs::Star,
                FuncArgs::List(items) => {
                    FuncArgs::List(items.into_iter().map(|i| reduce(i, 0, false)).collect())
                }
            },
        },
        Expr::Case {
            operand,
            whens,
            else_expr,
        } => Expr::Case {
            operand: operand.map(|o| Box::new(reduce(*o, 0, false))),
            whens: whens
                .into_iter()
                .map(|(c, r)| (reduce(c, 0, false), reduce(r, 0, false)))
                .collect(),
            else_expr: else_expr.map(|e| Box::new(reduce(*e, 0, false))),
        },
        Expr::Cast { expr, type_tokens } => Expr::Cast {
            expr: Box::new(reduce(*expr, 0, false)),
            type_tokens,
        },
        // Subquery interiors are out of bounds for every rewrite.
        leaf @ (Expr::Literal(_)
        | Expr::Column(_)
        | Expr::Exists { .. }
        | Expr::Subquery(_)) => leaf,
    }
}

fn sort_expr(e: Expr) -> Expr {
    match e {
        Expr::Chain { op, terms } => {
            let mut terms: Vec<Expr> = terms.into_iter().map(sort_expr).collect();
            terms.sort_by_key(serialize_expr);
            Expr::Chain { op, terms }
        }
        Expr::Paren(inner) => Expr::Paren(Box::new(sort_expr(*inner))),
        Expr::Unary { op, expr } => Expr::Unary {
            op,
            expr: Box::new(sort_expr(*expr)),
        },
        Expr::Binary { op, left, right } => Expr::Binary {
            op,
            left: Box::new(sort_expr(*left)),
            right: Box::new(sort_expr(*right)),
        },
        Expr::Is {
            left,
            negated,
            right,
        } => Expr::Is {
            left: Box::new(sort_expr(*left)),
            negated,
            right: Box::new(sort_expr(*right)),
        },
        Expr::IsNull { expr, negated } => Expr::IsNull {
            expr: Box::new(sort_expr(*expr)),
            negated,
        },
        Expr::Between {
            expr,
            negated,
            low,
            high,
        } => Expr::Between {
            expr: Box::new(sort_expr(*expr)),
            negated,
            low: Box::new(sort_expr(*low)),
            high: Box::new(sort_expr(*high)),
        },
        Expr::Like {
            expr,
            negated,
            op,
            pattern,
            escape,
        } => Expr::Like {
            expr: Box::new(sort_expr(*expr)),
            negated,
            op,
            pattern: Box::new(sort_expr(*pattern)),
            escape: escape.map(|e| Box::new(sort_expr(*e))),
        },
        Expr::InList {
            expr,
            negated,
            items,
        } => Expr::InList {
            expr: Box::new(sort_expr(*expr)),
            negated,
            items: items.into_iter().map(sort_expr).collect(),
        },
        Expr::InSubquery {
            expr,
            negated,
            select,
        } => Expr::InSubquery {
            expr: Box::new(sort_expr(*expr)),
            negated,
            select,
        },
        Expr::Collate { expr, collation } => Expr::Collate {
            expr: Box::new(sort_expr(*expr)),
            collation,
        },
        Expr::Func {
            name,
            distinct,
            args,
        } => Expr::Func {
            name,
            distinct,
            args: match args {
                FuncArgs::Star => FuncArgs::Star,
                FuncArgs::List(items) => {
                    FuncArgs::List(items.into_iter().map(sort_expr).collect())
                }
            },
        },
        Expr::Case {
            operand,
            whens,
            else_expr,
        } => Expr::Case {
            operand: operand.map(|o| Box::new(sort_expr(*o))),
            whens: whens
                .into_iter()
                .map(|(c, r)| (sort_expr(c), sort_expr(r)))
                .collect(),
            else_expr: else_expr.map(|e| Box::new(sort_expr(*e))),
        },
        Expr::Cast { expr, type_tokens } => Expr::Cast {
            expr: Box::new(sort_expr(*expr)),
            type_tokens,
        },
        leaf @ (Expr::Literal(_)
        | Expr::Column(_)
        | Expr::Exists { .. }
        | Expr::Subquery(_)) => leaf,
    }
}

/// Apply `f` to every expression slot of the statement itself. Subquery
/// statements inside expressions are left to `f`'s own traversal, which
/// never enters them.
fn map_stmt_exprs(mut stmt: SelectStmt, f: &dyn Fn(Expr) -> Expr) -> SelectStmt {
    stmt.columns = stmt
        .columns
        .into_iter()
        .map(|item| match item {
            SelectItem::Expr { expr, alias } => SelectItem::Expr {
                expr: f(expr),
                alias,
            },
            other => other,
        })
        .collect();
    if let Some(from) = stmt.from.as_mut() {
        for join in from.joins.iter_mut() {
            join.constraint = join.constraint.take().map(|c| match c {
                JoinConstraint::On(e) => JoinConstraint::On(f(e)),
                other => other,
            });
        }
    }
    stmt.where_clause = stmt.where_clause.map(f);
    stmt.group_by = stmt.group_by.into_iter().map(f).collect();
    stmt.having = stmt.having.map(f);
    stmt.order_by = stmt
        .order_by
        .into_iter()
        .map(|mut item| {
            item.expr = f(item.expr);
            item
        })
        .collect();
    stmt.limit = stmt.limit.map(|mut l| {
        l.limit = f(l.limit);
        l.tail = match l.tail {
            LimitTail::None => LimitTail::None,
            LimitTail::Offset(e) => LimitTail::Offset(f(e)),
            LimitTail::Comma(e) => LimitTail::Comma(f(e)),
        };
        l
    });
    stmt
}
