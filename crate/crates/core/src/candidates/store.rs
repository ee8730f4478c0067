//! Template instantiation for the clause store.

use std::collections::BTreeSet;

use super::{ClauseSource, ExprStore};
use crate::frontend::{BinOp, Expr};
use crate::hoare::HoareProblem;
use crate::logic::{Clause, Normalized};

const OPS: [BinOp; 5] = [BinOp::Lt, BinOp::Le, BinOp::Eq, BinOp::Ge, BinOp::Gt];

fn push(out: &mut Vec<Clause>, seen: &mut BTreeSet<Clause>, e: Expr) {
    if let Ok(Normalized::Clause(c)) = Clause::from_atom(&e) {
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
}

/// `v op w`, then `v op k`, then `v + w op k` and `v - w op k`, for every
/// comparison op, deduplicated after normalization. Order is deterministic:
/// variables and constants are taken in sorted order.
pub fn template_clauses(vars: &BTreeSet<String>, constants: &BTreeSet<i64>) -> Vec<Clause> {
    let vars: Vec<&String> = vars.iter().collect();
    let mut pairs = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        for w in &vars[i + 1..] {
            pairs.push((Expr::var(v.as_str()), Expr::var(w.as_str())));
        }
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (v, w) in &pairs {
        for op in OPS {
            push(&mut out, &mut seen, Expr::binary(op, v.clone(), w.clone()));
        }
    }
    for v in &vars {
        for &k in constants {
            for op in OPS {
                push(&mut out, &mut seen, Expr::binary(op, Expr::var(v.as_str()), Expr::Int(k)));
            }
        }
    }
    for (v, w) in &pairs {
        for combine in [BinOp::Add, BinOp::Sub] {
            for &k in constants {
                for op in OPS {
                    let lhs = Expr::binary(combine, v.clone(), w.clone());
                    push(&mut out, &mut seen, Expr::binary(op, lhs, Expr::Int(k)));
                }
            }
        }
    }
    out
}

/// The store for `hp`: atoms of its pre, guard and post over program
/// variables first, then the templates over the program's constants plus
/// `{-1, 0, 1}`.
pub fn seed_clauses(hp: &HoareProblem) -> ExprStore {
    let mut store = ExprStore::new();
    for source in [&hp.pre, &hp.guard, &hp.post] {
        for atom in source.expr().atoms() {
            if !atom.vars().is_subset(&hp.vars) {
                continue;
            }
            if let Ok(Normalized::Clause(c)) = Clause::from_atom(atom) {
                store.insert(c, ClauseSource::Seeded);
            }
        }
    }
    let mut constants = hp.constants.clone();
    constants.extend([-1, 0, 1]);
    for c in template_clauses(&hp.vars, &constants) {
        store.insert(c, ClauseSource::Template);
    }
    store
}
