//! Strongest postcondition of straight-line code.
//!
//! Every modified variable gets a fresh symbol `v$k` for its pre-state value.
//! Intermediate definitions get further fresh symbols and the last definition
//! of `v` is named `v` itself, so the result is a conjunction of equalities
//! in which the fresh symbols are implicitly existential.

use std::collections::{BTreeMap, BTreeSet};

use super::{LogicError, Predicate};
use crate::frontend::{modified_vars, BinOp, Expr, Stmt};

/// Generator of `base$k` names that avoids a given set of taken names.
#[derive(Debug, Clone)]
pub struct Fresh {
    used: BTreeSet<String>,
    counter: usize,
}

impl Fresh {
    pub fn new(used: BTreeSet<String>) -> Fresh {
        Fresh { used, counter: 0 }
    }

    pub fn name(&mut self, base: &str) -> String {
        let base = base.split('$').next().unwrap_or(base);
        loop {
            self.counter += 1;
            let candidate = format!("{base}${}", self.counter);
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
        }
    }
}

/// The postcondition plus the symbols that name pre-state and havoc values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpTrace {
    pub pred: Predicate,
    /// Modified variable → symbol for its value before the segment.
    pub initial: BTreeMap<String, String>,
    /// Havocked variable → symbol for the chosen value, in execution order.
    pub havocs: Vec<(String, String)>,
}

impl SpTrace {
    /// Symbol holding the pre-state value of `var`.
    pub fn pre_symbol<'a>(&'a self, var: &'a str) -> &'a str {
        self.initial.get(var).map(String::as_str).unwrap_or(var)
    }
}

pub fn strongest_post(pre: &Predicate, stmts: &[Stmt]) -> Result<Predicate, LogicError> {
    strongest_post_trace(pre, stmts).map(|t| t.pred)
}

pub fn strongest_post_trace(pre: &Predicate, stmts: &[Stmt]) -> Result<SpTrace, LogicError> {
    if let Some(s) = stmts.iter().find(|s| s.is_compound()) {
        return Err(LogicError::CompoundStatement(s.to_string()));
    }
    let mut used: BTreeSet<String> = pre.free_vars().clone();
    for s in stmts {
        s.vars(&mut used);
    }
    let mut fresh = Fresh::new(used);

    let mut last_def = BTreeMap::new();
    for (i, s) in stmts.iter().enumerate() {
        if let Stmt::Assign { target, .. } | Stmt::Havoc(target) = s {
            last_def.insert(target.clone(), i);
        }
    }
    let initial: BTreeMap<String, String> = modified_vars(stmts).into_iter().map(|v| {
        let sym = fresh.name(&v);
        (v, sym)
    }).collect();
    let mut current = initial.clone();

    let rename = |e: &Expr, current: &BTreeMap<String, String>| e.rename(&|v| current.get(v).map(Expr::var));
    let mut parts = vec![rename(pre.expr(), &current)];
    let mut havocs = Vec::new();
    for (i, s) in stmts.iter().enumerate() {
        match s {
            Stmt::Assign { target, value } => {
                let value = rename(value, &current);
                let name = if last_def[target] == i { target.clone() } else { fresh.name(target) };
                parts.push(Expr::binary(BinOp::Eq, Expr::var(name.clone()), value));
                current.insert(target.clone(), name);
            }
            Stmt::Havoc(target) => {
                let name = if last_def[target] == i { target.clone() } else { fresh.name(target) };
                havocs.push((target.clone(), name.clone()));
                current.insert(target.clone(), name);
            }
            Stmt::Assume(c) => parts.push(rename(c, &current)),
            Stmt::Assert(_) => {}
            Stmt::If { .. } | Stmt::While { .. } => unreachable!(),
        }
    }
    Ok(SpTrace { pred: Predicate::from_expr(Expr::conjoin(parts)), initial, havocs })
}
