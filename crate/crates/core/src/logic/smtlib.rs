//! SMT-LIB 2 rendering of predicates over integer variables.

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use super::Predicate;
use crate::frontend::{BinOp, Expr, UnOp};

const RESERVED: &[&str] = &[
    "and", "or", "not", "xor", "ite", "let", "forall", "exists", "distinct", "true", "false", "par", "as", "div", "mod",
    "abs", "Int", "Bool", "_", "!",
];

fn symbol(name: &str) -> String {
    if RESERVED.contains(&name) {
        format!("|{name}|")
    } else {
        name.to_string()
    }
}

/// S-expression for an expression. Negative literals become `(- k)`;
/// nested `and`/`or` chains are flattened.
pub fn smt_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn flatten<'a>(e: &'a Expr, op: BinOp, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Binary(o, l, r) if *o == op => {
            flatten(l, op, out);
            flatten(r, op, out);
        }
        other => out.push(other),
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(v) if *v < 0 => {
            let _ = write!(out, "(- {})", v.unsigned_abs());
        }
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(v) => out.push_str(&symbol(v)),
        Expr::Unary(op, inner) => {
            out.push_str(match op {
                UnOp::Neg => "(- ",
                UnOp::Not => "(not ",
            });
            write_expr(out, inner);
            out.push(')');
        }
        Expr::Binary(BinOp::Ne, l, r) => {
            out.push_str("(not (= ");
            write_expr(out, l);
            out.push(' ');
            write_expr(out, r);
            out.push_str("))");
        }
        Expr::Binary(op @ (BinOp::And | BinOp::Or), _, _) => {
            let mut parts = Vec::new();
            flatten(e, *op, &mut parts);
            out.push('(');
            out.push_str(if *op == BinOp::And { "and" } else { "or" });
            for p in parts {
                out.push(' ');
                write_expr(out, p);
            }
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            let head = match op {
                BinOp::Eq => "=",
                other => other.symbol(),
            };
            let _ = write!(out, "({head} ");
            write_expr(out, l);
            out.push(' ');
            write_expr(out, r);
            out.push(')');
        }
    }
}

/// A complete satisfiability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub logic: String,
    /// Sorted; all of sort Int.
    pub declarations: Vec<String>,
    pub assertions: Vec<Predicate>,
    pub get_model: bool,
}

impl SmtScript {
    pub fn new(assertions: Vec<Predicate>, extra_vars: &BTreeSet<String>, get_model: bool) -> SmtScript {
        let mut decls: BTreeSet<String> = extra_vars.clone();
        for a in &assertions {
            decls.extend(a.free_vars().iter().cloned());
        }
        SmtScript { logic: "LIA".into(), declarations: decls.into_iter().collect(), assertions, get_model }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.get_model {
            out.push_str("(set-option :produce-models true)\n");
        }
        let _ = writeln!(out, "(set-logic {})", self.logic);
        for d in &self.declarations {
            let _ = writeln!(out, "(declare-const {} Int)", symbol(d));
        }
        for a in &self.assertions {
            let _ = writeln!(out, "(assert {})", smt_expr(a.expr()));
        }
        out.push_str("(check-sat)\n");
        if self.get_model {
            out.push_str("(get-model)\n");
        }
        out
    }
}

impl fmt::Display for SmtScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Script asserting every predicate, followed by `check-sat` and `get-model`.
pub fn to_smt(assertions: &[Predicate]) -> SmtScript {
    SmtScript::new(assertions.to_vec(), &BTreeSet::new(), true)
}

/// Validity of `antecedent => consequent`, posed as unsatisfiability of
/// `antecedent && !consequent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityQuery {
    pub antecedent: Predicate,
    pub consequent: Predicate,
    pub script: SmtScript,
}

pub fn implies(a: &Predicate, b: &Predicate) -> ValidityQuery {
    implies_over(a, b, &BTreeSet::new())
}

/// As [`implies`], additionally declaring `vars` so that models assign them.
pub fn implies_over(a: &Predicate, b: &Predicate, vars: &BTreeSet<String>) -> ValidityQuery {
    let script = SmtScript::new(vec![a.clone(), b.not()], vars, true);
    ValidityQuery { antecedent: a.clone(), consequent: b.clone(), script }
}
