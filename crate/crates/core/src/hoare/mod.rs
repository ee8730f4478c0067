//! The three loop-rule conditions, discharged with an SMT solver.
//!
//! * init: `P => I`
//! * preserve: `{I && B} body {I}` for every body path
//! * term: `I && !B` followed by each continuation path implies its goal
//!
//! "term" is postcondition sufficiency, not a termination proof.

mod problem;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

pub use problem::{build_problem, expand, loop_summary_stmts, program_obligations, HoareProblem, Obligation, ObligationEntry, Summaries};

use crate::frontend::{LoopId, Stmt};
use crate::interp::{eval_bool, exec_straight, State};
use crate::logic::{implies_over, strongest_post_trace, LogicError, Predicate};
use crate::smt::{Model, Solver, SolverStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HoareError {
    #[error("loop {0} has no verified summary")]
    MissingSummary(LoopId),
    #[error("no loop with id {0}")]
    UnknownLoop(LoopId),
    #[error("more than {0} straight-line paths")]
    PathExplosion(usize),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CeKind {
    Init,
    Preserve,
    Term,
}

/// A concrete loop-head state on which the candidate fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub kind: CeKind,
    /// Program variables at the loop head (at program entry for prefix
    /// obligations).
    pub state: State,
    /// Preserve only: the state after running the failing body path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_state: Option<State>,
    /// Index of the failing body path (preserve) or obligation (term).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<usize>,
    /// Values chosen by `havoc`s along the failing path, in order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub havoc: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry: Option<ObligationEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason")]
pub enum VerdictStatus {
    Valid,
    InitFail,
    PreserveFail,
    TermFail,
    Inconclusive(String),
}

impl VerdictStatus {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictStatus::Valid => "Valid",
            VerdictStatus::InitFail => "InitFail",
            VerdictStatus::PreserveFail => "PreserveFail",
            VerdictStatus::TermFail => "TermFail",
            VerdictStatus::Inconclusive(_) => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub counterexample: Option<Counterexample>,
    /// Solver queries issued for this verdict.
    pub queries: u64,
}

impl Verdict {
    fn valid(queries: u64) -> Verdict {
        Verdict { status: VerdictStatus::Valid, counterexample: None, queries }
    }

    pub fn is_valid(&self) -> bool {
        self.status == VerdictStatus::Valid
    }
}

enum Query {
    Valid,
    Refuted(Model),
    Inconclusive(String),
}

fn ask(solver: &Solver, antecedent: &Predicate, consequent: &Predicate, vars: &BTreeSet<String>) -> Query {
    let q = implies_over(antecedent, consequent, vars);
    let r = solver.check(&q.script);
    match r.status {
        SolverStatus::Unsat => Query::Valid,
        SolverStatus::Sat => match r.model {
            Some(m) => Query::Refuted(m),
            None => Query::Inconclusive("sat without model".into()),
        },
        SolverStatus::Unknown => Query::Inconclusive("unknown".into()),
        SolverStatus::Timeout => Query::Inconclusive("timeout".into()),
        SolverStatus::SolverError(e) => Query::Inconclusive(format!("solver error: {e}")),
    }
}

fn project(model: &Model, vars: &BTreeSet<String>, symbol: impl Fn(&str) -> String) -> State {
    vars.iter().map(|v| (v.clone(), model.get(&symbol(v)).copied().unwrap_or(0))).collect()
}

/// Counterexample search along one straight-line path starting from
/// `start`, whose end must satisfy `goal`.
fn check_path(solver: &Solver, start: &Predicate, path: &[Stmt], goal: &Predicate, vars: &BTreeSet<String>) -> Result<Option<(State, Vec<i64>, State)>, String> {
    let trace = strongest_post_trace(start, path).map_err(|e| e.to_string())?;
    let mut all = vars.clone();
    all.extend(trace.initial.values().cloned());
    all.extend(trace.havocs.iter().map(|(_, s)| s.clone()));
    match ask(solver, &trace.pred, goal, &all) {
        Query::Valid => Ok(None),
        Query::Inconclusive(r) => Err(r),
        Query::Refuted(model) => {
            let pre = project(&model, vars, |v| trace.pre_symbol(v).to_string());
            let havoc = trace.havocs.iter().map(|(_, s)| model.get(s).copied().unwrap_or(0)).collect();
            let post = project(&model, vars, |v| v.to_string());
            Ok(Some((pre, havoc, post)))
        }
    }
}

fn inconclusive(reason: String, queries: u64) -> Verdict {
    Verdict { status: VerdictStatus::Inconclusive(reason), counterexample: None, queries }
}

/// `P => I`.
pub fn check_initialization(solver: &Solver, pre: &Predicate, inv: &Predicate, vars: &BTreeSet<String>) -> Verdict {
    let mut all = vars.clone();
    all.extend(pre.free_vars().iter().cloned());
    all.extend(inv.free_vars().iter().cloned());
    match ask(solver, pre, inv, &all) {
        Query::Valid => Verdict::valid(1),
        Query::Inconclusive(r) => inconclusive(r, 1),
        Query::Refuted(model) => {
            let state = project(&model, vars, |v| v.to_string());
            let ce = Counterexample { kind: CeKind::Init, state, post_state: None, segment: None, havoc: Vec::new(), entry: None };
            Verdict { status: VerdictStatus::InitFail, counterexample: Some(ce), queries: 1 }
        }
    }
}

/// `{I && B} path {I}` for every body path, stopping at the first failure.
pub fn check_preservation(solver: &Solver, inv: &Predicate, guard: &Predicate, body: &[Vec<Stmt>], vars: &BTreeSet<String>) -> Verdict {
    let start = inv.and(guard);
    let mut queries = 0;
    for (k, path) in body.iter().enumerate() {
        queries += 1;
        match check_path(solver, &start, path, inv, vars) {
            Ok(None) => {}
            Err(r) => return inconclusive(r, queries),
            Ok(Some((state, havoc, model_post))) => {
                let post_state = exec_straight(path, &state, &havoc).unwrap_or(model_post);
                let ce = Counterexample { kind: CeKind::Preserve, state, post_state: Some(post_state), segment: Some(k), havoc, entry: None };
                return Verdict { status: VerdictStatus::PreserveFail, counterexample: Some(ce), queries };
            }
        }
    }
    Verdict::valid(queries)
}

/// Every obligation from the loop head, stopping at the first failure.
pub fn check_obligations(solver: &Solver, inv: &Predicate, guard: &Predicate, obligations: &[Obligation], vars: &BTreeSet<String>) -> Verdict {
    let exit_start = inv.and(&guard.not());
    let body_start = inv.and(guard);
    let mut queries = 0;
    for (k, o) in obligations.iter().enumerate() {
        let start = match o.entry {
            ObligationEntry::Exit => &exit_start,
            ObligationEntry::Body => &body_start,
        };
        queries += 1;
        match check_path(solver, start, &o.path, &o.goal, vars) {
            Ok(None) => {}
            Err(r) => return inconclusive(r, queries),
            Ok(Some((state, havoc, _))) => {
                let ce = Counterexample { kind: CeKind::Term, state, post_state: None, segment: Some(k), havoc, entry: Some(o.entry) };
                return Verdict { status: VerdictStatus::TermFail, counterexample: Some(ce), queries };
            }
        }
    }
    Verdict::valid(queries)
}

/// `I && !B => Q`.
pub fn check_termination_cond(solver: &Solver, inv: &Predicate, guard: &Predicate, post: &Predicate, vars: &BTreeSet<String>) -> Verdict {
    let o = Obligation { entry: ObligationEntry::Exit, path: Vec::new(), goal: post.clone() };
    check_obligations(solver, inv, guard, std::slice::from_ref(&o), vars)
}

/// init, then preserve, then term; the first failure wins.
pub fn check_invariant(solver: &Solver, hp: &HoareProblem, inv: &Predicate) -> Verdict {
    let init = check_initialization(solver, &hp.pre, inv, &hp.vars);
    if !init.is_valid() {
        return init;
    }
    let mut pres = check_preservation(solver, inv, &hp.guard, &hp.body, &hp.vars);
    pres.queries += init.queries;
    if !pres.is_valid() {
        return pres;
    }
    let mut term = check_obligations(solver, inv, &hp.guard, &hp.obligations, &hp.vars);
    term.queries += pres.queries;
    term
}

/// Obligations on loop-free program paths, checked from the precondition.
pub fn check_program_obligations(solver: &Solver, pre: &Predicate, obligations: &[Obligation], vars: &BTreeSet<String>) -> Verdict {
    let mut queries = 0;
    for (k, o) in obligations.iter().enumerate() {
        queries += 1;
        match check_path(solver, pre, &o.path, &o.goal, vars) {
            Ok(None) => {}
            Err(r) => return inconclusive(r, queries),
            Ok(Some((state, havoc, _))) => {
                let ce = Counterexample { kind: CeKind::Term, state, post_state: None, segment: Some(k), havoc, entry: None };
                return Verdict { status: VerdictStatus::TermFail, counterexample: Some(ce), queries };
            }
        }
    }
    Verdict::valid(queries)
}

/// Replays a counterexample concretely against `hp` and `inv`: the failure
/// it claims must actually happen.
pub fn revalidate(hp: &HoareProblem, inv: &Predicate, ce: &Counterexample) -> bool {
    let holds = |s: &State, p: &Predicate| eval_bool(p.expr(), s).ok();
    match ce.kind {
        CeKind::Init => holds(&ce.state, inv) == Some(false),
        CeKind::Preserve => {
            let Some(path) = ce.segment.and_then(|k| hp.body.get(k)) else { return false };
            let Some(post) = exec_straight(path, &ce.state, &ce.havoc) else { return false };
            Some(&post) == ce.post_state.as_ref()
                && holds(&ce.state, inv) == Some(true)
                && holds(&ce.state, &hp.guard) == Some(true)
                && holds(&post, inv) == Some(false)
        }
        CeKind::Term => term_replays(hp, ce) && holds(&ce.state, inv) == Some(true),
    }
}

/// The term counterexample's path, run from its state, violates the goal;
/// this does not depend on the invariant.
pub fn term_replays(hp: &HoareProblem, ce: &Counterexample) -> bool {
    let Some(o) = ce.segment.and_then(|k| hp.obligations.get(k)) else { return false };
    let guard = eval_bool(hp.guard.expr(), &ce.state).ok();
    let entry_ok = match o.entry {
        ObligationEntry::Exit => guard == Some(false),
        ObligationEntry::Body => guard == Some(true),
    };
    let Some(end) = exec_straight(&o.path, &ce.state, &ce.havoc) else { return false };
    entry_ok && eval_bool(o.goal.expr(), &end) == Ok(false)
}
