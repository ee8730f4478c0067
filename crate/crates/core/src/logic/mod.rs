//! Formulas over integer program variables: predicates, linear clauses,
//! strongest postconditions and SMT-LIB serialization.

mod clause;
mod smtlib;
mod sp;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::frontend::{Expr, Ty};

pub use clause::{linearize, Clause, ClauseOp, Linear, Normalized};
pub use smtlib::{implies, implies_over, smt_expr, to_smt, SmtScript, ValidityQuery};
pub use sp::{strongest_post, strongest_post_trace, Fresh, SpTrace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("type error: {0}")]
    Type(String),
    #[error("compound statement `{0}` in a straight-line segment")]
    CompoundStatement(String),
    #[error("not a linear term: {0}")]
    NonLinear(String),
    #[error("integer overflow while normalizing `{0}`")]
    Overflow(String),
}

/// A boolean formula together with its free variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    expr: Expr,
    free_vars: BTreeSet<String>,
}

impl Predicate {
    /// Wrap a formula, rejecting integer-valued or ill-typed expressions.
    pub fn new(expr: Expr) -> Result<Predicate, LogicError> {
        match expr.ty() {
            Ok(Ty::Bool) => Ok(Predicate::from_expr(expr)),
            Ok(Ty::Int) => Err(LogicError::Type(format!("`{expr}` is an integer expression, not a formula"))),
            Err(e) => Err(LogicError::Type(e)),
        }
    }

    /// Wrap an expression already known to be boolean.
    pub fn from_expr(expr: Expr) -> Predicate {
        let free_vars = expr.vars();
        Predicate { expr, free_vars }
    }

    pub fn tt() -> Predicate {
        Predicate::from_expr(Expr::Bool(true))
    }

    pub fn ff() -> Predicate {
        Predicate::from_expr(Expr::Bool(false))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn into_expr(self) -> Expr {
        self.expr
    }

    pub fn free_vars(&self) -> &BTreeSet<String> {
        &self.free_vars
    }

    pub fn is_true(&self) -> bool {
        self.expr == Expr::Bool(true)
    }

    pub fn and(&self, other: &Predicate) -> Predicate {
        Predicate::from_expr(Expr::and(self.expr.clone(), other.expr.clone()))
    }

    pub fn or(&self, other: &Predicate) -> Predicate {
        Predicate::from_expr(Expr::or(self.expr.clone(), other.expr.clone()))
    }

    pub fn not(&self) -> Predicate {
        Predicate::from_expr(self.expr.clone().negate())
    }

    pub fn conjoin<'a>(parts: impl IntoIterator<Item = &'a Predicate>) -> Predicate {
        Predicate::from_expr(Expr::conjoin(parts.into_iter().map(|p| p.expr.clone())))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

impl From<Expr> for Predicate {
    fn from(e: Expr) -> Predicate {
        Predicate::from_expr(e)
    }
}

/// `p[e/var]`. Substitution is capture-free since formulas have no binders.
pub fn substitute(p: &Predicate, var: &str, e: &Expr) -> Result<Predicate, LogicError> {
    match e.ty() {
        Ok(Ty::Int) => {}
        Ok(Ty::Bool) => return Err(LogicError::Type(format!("cannot substitute boolean `{e}` for `{var}`"))),
        Err(msg) => return Err(LogicError::Type(msg)),
    }
    let out = p.expr.rename(&|v| (v == var).then(|| e.clone()));
    Ok(Predicate::from_expr(out))
}
