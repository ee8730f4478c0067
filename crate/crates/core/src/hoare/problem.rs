//! Assembly of per-loop verification problems from the AST.
//!
//! Loops other than the one under study are cut points: a loop `W` on a path
//! is replaced by `havoc(mods W); assume(I_W && !B_W)` where `I_W` is its
//! recorded summary. Continuation obligations stop at the next loop head
//! (that loop's own initialization check covers it) and at the end of an
//! enclosing loop body (the enclosing loop's preservation check covers it).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::HoareError;
use crate::cfg::{Cfg, NodeKind};
use crate::frontend::{modified_vars, Expr, LoopId, Program, Stmt};
use crate::logic::{strongest_post, Predicate};

/// Loop id → verified (or assumed) invariant.
pub type Summaries = BTreeMap<LoopId, Predicate>;

const MAX_PATHS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObligationEntry {
    /// Starts at the loop head with `I && !B`.
    Exit,
    /// Starts at the loop head with `I && B`.
    Body,
}

/// A straight-line path from the loop head and the formula that must hold
/// at its end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obligation {
    pub entry: ObligationEntry,
    pub path: Vec<Stmt>,
    pub goal: Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoareProblem {
    pub loop_id: LoopId,
    /// States reaching the loop head from program entry; may mention
    /// existential `v$k` symbols.
    pub pre: Predicate,
    pub guard: Predicate,
    /// Every path through one iteration of the body, branch conditions as
    /// in-place `assume`s and inner loops summarized.
    pub body: Vec<Vec<Stmt>>,
    pub obligations: Vec<Obligation>,
    /// Conjunction of the distinct obligation goals, for display and seeding.
    pub post: Predicate,
    pub vars: BTreeSet<String>,
    /// Constants of the whole program.
    pub constants: BTreeSet<i64>,
}

pub(crate) fn contains_loop(stmts: &[Stmt], target: LoopId) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::While { loop_id, body, .. } => *loop_id == target || contains_loop(body, target),
        Stmt::If { then_branch, else_branch, .. } => contains_loop(then_branch, target) || contains_loop(else_branch, target),
        _ => false,
    })
}

fn cross(prefixes: Vec<Vec<Stmt>>, tails: &[Vec<Stmt>]) -> Result<Vec<Vec<Stmt>>, HoareError> {
    if prefixes.len().saturating_mul(tails.len()) > MAX_PATHS {
        return Err(HoareError::PathExplosion(MAX_PATHS));
    }
    let mut out = Vec::with_capacity(prefixes.len() * tails.len());
    for p in &prefixes {
        for t in tails {
            let mut q = p.clone();
            q.extend(t.iter().cloned());
            out.push(q);
        }
    }
    Ok(out)
}

/// `havoc(mods W); assume(I_W && !B_W)`.
pub fn loop_summary_stmts(cond: &Expr, body: &[Stmt], summary: Option<&Predicate>) -> Vec<Stmt> {
    let mut out: Vec<Stmt> = modified_vars(body).into_iter().map(Stmt::Havoc).collect();
    let inv = summary.map(|p| p.expr().clone()).unwrap_or(Expr::Bool(true));
    out.push(Stmt::Assume(Expr::and(inv, cond.clone().negate())));
    out
}

/// All straight-line paths through `stmts`. With `strict`, every loop must
/// have a summary.
pub fn expand(stmts: &[Stmt], summaries: &Summaries, strict: bool) -> Result<Vec<Vec<Stmt>>, HoareError> {
    let mut paths = vec![Vec::new()];
    for s in stmts {
        match s {
            Stmt::If { cond, then_branch, else_branch } => {
                let mut alts = Vec::new();
                for (arm, c) in [(then_branch, cond.clone()), (else_branch, cond.clone().negate())] {
                    for mut p in expand(arm, summaries, strict)? {
                        p.insert(0, Stmt::Assume(c.clone()));
                        alts.push(p);
                    }
                }
                paths = cross(paths, &alts)?;
            }
            Stmt::While { cond, body, loop_id } => {
                let summary = summaries.get(loop_id);
                if strict && summary.is_none() {
                    return Err(HoareError::MissingSummary(*loop_id));
                }
                let tail = loop_summary_stmts(cond, body, summary);
                paths.iter_mut().for_each(|p| p.extend(tail.iter().cloned()));
            }
            simple => paths.iter_mut().for_each(|p| p.push(simple.clone())),
        }
    }
    Ok(paths)
}

/// Paths from the start of `stmts` to the head of `target`.
fn route(stmts: &[Stmt], target: LoopId, summaries: &Summaries, mut cur: Vec<Vec<Stmt>>) -> Result<Option<Vec<Vec<Stmt>>>, HoareError> {
    for s in stmts {
        let inside = match s {
            Stmt::While { loop_id, body, .. } => *loop_id == target || contains_loop(body, target),
            Stmt::If { then_branch, else_branch, .. } => contains_loop(then_branch, target) || contains_loop(else_branch, target),
            _ => false,
        };
        if !inside {
            cur = cross(cur, &expand(std::slice::from_ref(s), summaries, false)?)?;
            continue;
        }
        return match s {
            Stmt::While { loop_id, .. } if *loop_id == target => Ok(Some(cur)),
            Stmt::While { cond, body, loop_id } => {
                // Some iteration of the enclosing loop: its head invariant and guard hold.
                let mut tail: Vec<Stmt> = modified_vars(body).into_iter().map(Stmt::Havoc).collect();
                let inv = summaries.get(loop_id).map(|p| p.expr().clone()).unwrap_or(Expr::Bool(true));
                tail.push(Stmt::Assume(Expr::and(inv, cond.clone())));
                cur.iter_mut().for_each(|p| p.extend(tail.iter().cloned()));
                route(body, target, summaries, cur)
            }
            Stmt::If { cond, then_branch, else_branch } => {
                let (arm, c) = if contains_loop(then_branch, target) {
                    (then_branch, cond.clone())
                } else {
                    (else_branch, cond.clone().negate())
                };
                cur.iter_mut().for_each(|p| p.push(Stmt::Assume(c.clone())));
                route(arm, target, summaries, cur)
            }
            _ => unreachable!(),
        };
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameEnd {
    Program,
    LoopBody,
    Branch,
}

#[derive(Debug, Clone)]
struct Frame<'a> {
    rest: &'a [Stmt],
    end: FrameEnd,
}

/// Continuation frames (outermost first) right after `target` exits.
fn exit_frames<'a>(stmts: &'a [Stmt], target: LoopId, end: FrameEnd) -> Option<Vec<Frame<'a>>> {
    for (i, s) in stmts.iter().enumerate() {
        match s {
            Stmt::While { loop_id, .. } if *loop_id == target => {
                return Some(vec![Frame { rest: &stmts[i + 1..], end }]);
            }
            Stmt::While { body, .. } if contains_loop(body, target) => {
                return exit_frames(body, target, FrameEnd::LoopBody);
            }
            Stmt::If { then_branch, else_branch, .. } => {
                let inner = if contains_loop(then_branch, target) {
                    exit_frames(then_branch, target, FrameEnd::Branch)
                } else if contains_loop(else_branch, target) {
                    exit_frames(else_branch, target, FrameEnd::Branch)
                } else {
                    continue;
                };
                let mut frames = vec![Frame { rest: &stmts[i + 1..], end }];
                frames.extend(inner?);
                return Some(frames);
            }
            _ => {}
        }
    }
    None
}

/// Collect assert and postcondition obligations along every path from the
/// current position until a loop head, the end of a loop body, or the end of
/// the program.
fn walk(mut frames: Vec<Frame<'_>>, mut prefix: Vec<Stmt>, post: Option<&Expr>, entry: ObligationEntry, out: &mut Vec<Obligation>) {
    loop {
        let Some(top) = frames.last_mut() else { return };
        let Some((s, rest)) = top.rest.split_first() else {
            let end = top.end;
            frames.pop();
            match end {
                FrameEnd::Program => {
                    if let Some(q) = post {
                        out.push(Obligation { entry, path: prefix, goal: Predicate::from_expr(q.clone()) });
                    }
                    return;
                }
                FrameEnd::LoopBody => return,
                FrameEnd::Branch => continue,
            }
        };
        top.rest = rest;
        match s {
            Stmt::While { .. } => return,
            Stmt::If { cond, then_branch, else_branch } => {
                for (arm, c) in [(then_branch, cond.clone()), (else_branch, cond.clone().negate())] {
                    let mut f = frames.clone();
                    f.push(Frame { rest: arm, end: FrameEnd::Branch });
                    let mut p = prefix.clone();
                    p.push(Stmt::Assume(c));
                    walk(f, p, post, entry, out);
                }
                return;
            }
            Stmt::Assert(c) => {
                out.push(Obligation { entry, path: prefix.clone(), goal: Predicate::from_expr(c.clone()) });
                prefix.push(Stmt::Assume(c.clone()));
            }
            other => prefix.push(other.clone()),
        }
    }
}

/// Obligations on program paths that reach no loop, checked from the
/// precondition at program entry.
pub fn program_obligations(p: &Program) -> Vec<Obligation> {
    let mut out = Vec::new();
    let post = p.postcondition();
    walk(vec![Frame { rest: &p.body, end: FrameEnd::Program }], Vec::new(), post.as_ref(), ObligationEntry::Exit, &mut out);
    out
}

fn find_loop(stmts: &[Stmt], target: LoopId) -> Option<(&Expr, &[Stmt])> {
    for s in stmts {
        match s {
            Stmt::While { loop_id, cond, body } if *loop_id == target => return Some((cond, body)),
            Stmt::While { body, .. } => {
                if let Some(found) = find_loop(body, target) {
                    return Some(found);
                }
            }
            Stmt::If { then_branch, else_branch, .. } => {
                if let Some(found) = find_loop(then_branch, target).or_else(|| find_loop(else_branch, target)) {
                    return Some(found);
                }
            }
            _ => {}
        }
    }
    None
}

/// Build the verification problem for `loop_id`. Every loop nested in its
/// body must have an entry in `summaries`; other loops fall back to `true`.
pub fn build_problem(p: &Program, g: &Cfg, loop_id: LoopId, summaries: &Summaries) -> Result<HoareProblem, HoareError> {
    let region = g.loop_regions.get(&loop_id).ok_or(HoareError::UnknownLoop(loop_id))?;
    let NodeKind::LoopHeader { cond: header_cond, .. } = &g.node(region.header).kind else {
        return Err(HoareError::UnknownLoop(loop_id));
    };
    let (cond, body) = find_loop(&p.body, loop_id).ok_or(HoareError::UnknownLoop(loop_id))?;
    debug_assert_eq!(cond, header_cond);

    let pre_annotation = Predicate::from_expr(p.precondition());
    let prefixes = route(&p.body, loop_id, summaries, vec![Vec::new()])?.ok_or(HoareError::UnknownLoop(loop_id))?;
    let mut disjuncts = Vec::new();
    for path in &prefixes {
        let post = strongest_post(&pre_annotation, path).map_err(HoareError::Logic)?;
        if !disjuncts.contains(post.expr()) {
            disjuncts.push(post.into_expr());
        }
    }
    let pre = Predicate::from_expr(Expr::disjoin(disjuncts));

    let body_paths = expand(body, summaries, true)?;

    let mut obligations = Vec::new();
    let post = p.postcondition();
    walk(vec![Frame { rest: body, end: FrameEnd::LoopBody }], Vec::new(), None, ObligationEntry::Body, &mut obligations);
    let frames = exit_frames(&p.body, loop_id, FrameEnd::Program).ok_or(HoareError::UnknownLoop(loop_id))?;
    walk(frames, Vec::new(), post.as_ref(), ObligationEntry::Exit, &mut obligations);

    let mut goals: Vec<Expr> = Vec::new();
    for o in &obligations {
        if !goals.contains(o.goal.expr()) {
            goals.push(o.goal.expr().clone());
        }
    }

    Ok(HoareProblem {
        loop_id,
        pre,
        guard: Predicate::from_expr(cond.clone()),
        body: body_paths,
        obligations,
        post: Predicate::from_expr(Expr::conjoin(goals)),
        vars: p.decls.iter().cloned().collect(),
        constants: p.constants(),
    })
}
