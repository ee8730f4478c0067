//! Oracles shared by the integration tests and the acceptance target.
//!
//! Each oracle avoids the machinery it checks: states are enumerated and
//! executed by a small interpreter written here, and path segments are
//! recovered by simple-path search over the CFG rather than by the
//! structural walk that `find_all_paths` uses.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use pathinv_core::cfg::{branch_sub_cfgs, extract_loop_cfg, Cfg, NodeKind};
use pathinv_core::frontend::{parse_formula, parse_program, BinOp, Expr, LoopId, Program, Stmt, UnOp};
use pathinv_core::logic::{strongest_post, Predicate, SmtScript};
use pathinv_core::paths::{PathSet, Region};
use pathinv_core::smt::{Solver, SolverConfig, SolverStatus};

// ---------------------------------------------------------------- corpus

#[derive(Debug, Clone, Deserialize)]
pub struct Entry {
    pub file: String,
    pub broken_loop: usize,
    pub broken: String,
    pub expect: String,
    pub combinor: String,
    #[serde(default)]
    pub llm: bool,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Deserialize)]
struct Manifest {
    program: Vec<Entry>,
}

impl Entry {
    pub fn name(&self) -> &str {
        self.file.trim_end_matches(".mc")
    }

    pub fn path(&self) -> PathBuf {
        corpus_dir().join(&self.file)
    }

    pub fn program(&self) -> Program {
        let src = std::fs::read_to_string(self.path()).expect("corpus file readable");
        parse_program(&src).unwrap_or_else(|e| panic!("{}: {e}", self.file))
    }

    pub fn broken_invariant(&self) -> Predicate {
        Predicate::new(parse_formula(&self.broken).expect("broken invariant parses")).expect("broken invariant is boolean")
    }
}

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn manifest() -> Vec<Entry> {
    let text = std::fs::read_to_string(corpus_dir().join("manifest.toml")).expect("manifest readable");
    let m: Manifest = toml::from_str(&text).expect("manifest parses");
    m.program
}

pub fn solver() -> Solver {
    let cfg = SolverConfig::discover(None, 10_000).expect("these tests need z3 or cvc5 on PATH or in PATHINV_SOLVER");
    Solver::new(cfg)
}

pub fn gold(p: &Program) -> BTreeMap<LoopId, Predicate> {
    p.loop_ids()
        .into_iter()
        .map(|k| (k, Predicate::from_expr(p.gold_invariant(k).expect("gold invariant per loop").clone())))
        .collect()
}

// ----------------------------------------------------------- interpreter

pub type St = BTreeMap<String, i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    I(i64),
    B(bool),
}

fn eval(e: &Expr, s: &St) -> Option<Val> {
    use Val::{B, I};
    Some(match e {
        Expr::Int(k) => I(*k),
        Expr::Bool(b) => B(*b),
        Expr::Var(v) => I(*s.get(v)?),
        Expr::Unary(UnOp::Neg, a) => match eval(a, s)? {
            I(x) => I(x.checked_neg()?),
            B(_) => return None,
        },
        Expr::Unary(UnOp::Not, a) => match eval(a, s)? {
            B(x) => B(!x),
            I(_) => return None,
        },
        Expr::Binary(op, a, b) => match (op, eval(a, s)?, eval(b, s)?) {
            (BinOp::Add, I(x), I(y)) => I(x.checked_add(y)?),
            (BinOp::Sub, I(x), I(y)) => I(x.checked_sub(y)?),
            (BinOp::Mul, I(x), I(y)) => I(x.checked_mul(y)?),
            (BinOp::Lt, I(x), I(y)) => B(x < y),
            (BinOp::Le, I(x), I(y)) => B(x <= y),
            (BinOp::Gt, I(x), I(y)) => B(x > y),
            (BinOp::Ge, I(x), I(y)) => B(x >= y),
            (BinOp::Eq, I(x), I(y)) => B(x == y),
            (BinOp::Ne, I(x), I(y)) => B(x != y),
            (BinOp::And, B(x), B(y)) => B(x && y),
            (BinOp::Or, B(x), B(y)) => B(x || y),
            _ => return None,
        },
    })
}

pub fn truth(e: &Expr, s: &St) -> Option<bool> {
    match eval(e, s)? {
        Val::B(b) => Some(b),
        Val::I(_) => None,
    }
}

fn int(e: &Expr, s: &St) -> Option<i64> {
    match eval(e, s)? {
        Val::I(v) => Some(v),
        Val::B(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum End {
    Done(St),
    Blocked,
    AssertFailed(Expr, St),
    /// Step cap, exhausted havoc choices, or an evaluation error.
    Cutoff,
}

pub struct Exec<'a> {
    pub choices: Vec<i64>,
    next: usize,
    steps: usize,
    cap: usize,
    on_head: &'a mut dyn FnMut(LoopId, &St),
}

impl<'a> Exec<'a> {
    pub fn new(choices: Vec<i64>, cap: usize, on_head: &'a mut dyn FnMut(LoopId, &St)) -> Exec<'a> {
        Exec { choices, next: 0, steps: 0, cap, on_head }
    }

    pub fn run(&mut self, stmts: &[Stmt], mut s: St) -> End {
        match self.block(stmts, &mut s) {
            Ok(()) => End::Done(s),
            Err(e) => e,
        }
    }

    fn block(&mut self, stmts: &[Stmt], s: &mut St) -> Result<(), End> {
        for st in stmts {
            self.steps += 1;
            if self.steps > self.cap {
                return Err(End::Cutoff);
            }
            match st {
                Stmt::Assign { target, value } => {
                    let v = int(value, s).ok_or(End::Cutoff)?;
                    s.insert(target.clone(), v);
                }
                Stmt::Havoc(target) => {
                    let v = *self.choices.get(self.next).ok_or(End::Cutoff)?;
                    self.next += 1;
                    s.insert(target.clone(), v);
                }
                Stmt::Assume(c) => {
                    if !truth(c, s).ok_or(End::Cutoff)? {
                        return Err(End::Blocked);
                    }
                }
                Stmt::Assert(c) => {
                    if !truth(c, s).ok_or(End::Cutoff)? {
                        return Err(End::AssertFailed(c.clone(), s.clone()));
                    }
                }
                Stmt::If { cond, then_branch, else_branch } => {
                    let arm = if truth(cond, s).ok_or(End::Cutoff)? { then_branch } else { else_branch };
                    self.block(arm, s)?;
                }
                Stmt::While { cond, body, loop_id } => loop {
                    (self.on_head)(*loop_id, s);
                    if !truth(cond, s).ok_or(End::Cutoff)? {
                        break;
                    }
                    self.block(body, s)?;
                    self.steps += 1;
                    if self.steps > self.cap {
                        return Err(End::Cutoff);
                    }
                },
            }
        }
        Ok(())
    }
}

/// Every assignment of `vars` to values in `lo..=hi`.
pub fn grid(vars: &[String], lo: i64, hi: i64) -> Vec<St> {
    let mut out = vec![St::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|s| {
                (lo..=hi).map(move |k| {
                    let mut t = s.clone();
                    t.insert(v.clone(), k);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn count_havocs(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::Havoc(_) => 1,
            Stmt::If { then_branch, else_branch, .. } => count_havocs(then_branch) + count_havocs(else_branch),
            Stmt::While { body, .. } => count_havocs(body),
            _ => 0,
        })
        .sum()
}

// ------------------------------------------------------ bounded soundness

/// Runs `p` from every state in `[lo, hi]^vars` that satisfies the
/// precondition and reports each violation: an invariant false at a visit
/// of its loop head, a failed assert, or a false postcondition at exit.
/// Havoc values are drawn from the same range; a program whose havocs sit
/// inside loops gets one value reused for every draw.
pub fn bounded_violations(p: &Program, invariants: &BTreeMap<LoopId, Predicate>, lo: i64, hi: i64, cap: usize) -> Vec<String> {
    let pre = p.precondition();
    let post = p.postcondition();
    let straight_havocs = count_havocs(&p.body);
    let in_loop = p.loops().iter().any(|l| matches!(l, Stmt::While { body, .. } if count_havocs(body) > 0));
    let choice_sets: Vec<Vec<i64>> = if straight_havocs == 0 {
        vec![Vec::new()]
    } else if in_loop {
        (lo..=hi).map(|k| vec![k; cap]).collect()
    } else {
        let names: Vec<String> = (0..straight_havocs).map(|i| format!("h{i}")).collect();
        grid(&names, lo, hi).into_iter().map(|g| g.into_values().collect()).collect()
    };
    let mut out = Vec::new();
    for s0 in grid(&p.decls, lo, hi) {
        if truth(&pre, &s0) != Some(true) {
            continue;
        }
        for choices in &choice_sets {
            let mut bad = Vec::new();
            let mut on_head = |id: LoopId, s: &St| {
                if let Some(inv) = invariants.get(&id) {
                    if truth(inv.expr(), s) != Some(true) {
                        bad.push(format!("invariant of loop {id} false at {s:?}"));
                    }
                }
            };
            let end = Exec::new(choices.clone(), cap, &mut on_head).run(&p.body, s0.clone());
            match end {
                End::Done(s) => {
                    if let Some(q) = &post {
                        if truth(q, &s) == Some(false) {
                            bad.push(format!("postcondition false at exit {s:?} from {s0:?}"));
                        }
                    }
                }
                End::AssertFailed(a, s) => bad.push(format!("assert({a}) failed at {s:?} from {s0:?}")),
                End::Blocked | End::Cutoff => {}
            }
            out.extend(bad);
        }
    }
    out
}

// ------------------------------------------------------------ sp oracle

pub const SP_VARS: [&str; 3] = ["x", "y", "z"];
pub const SP_BOX: i64 = 4;

fn lin(rng: &mut ChaCha8Rng, vars: &[&str]) -> Expr {
    let mut e = Expr::Int(rng.random_range(-3..=3));
    for v in vars {
        let a: i64 = rng.random_range(-2..=2);
        if a != 0 {
            let term = if a == 1 { Expr::var(*v) } else { Expr::binary(BinOp::Mul, Expr::Int(a), Expr::var(*v)) };
            e = Expr::binary(BinOp::Add, term, e);
        }
    }
    e
}

/// A random straight-line segment over 1 to 3 variables with at most five
/// statements: linear assignments, linear assumes and at most one havoc,
/// whose value is confined to the box by the assume that follows it.
pub fn random_segment(seed: u64) -> (Vec<String>, Vec<Stmt>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let vars: Vec<&str> = SP_VARS[..n].to_vec();
    let len = rng.random_range(1..=5);
    let mut stmts = Vec::new();
    let mut havoced = false;
    while stmts.len() < len {
        let v = vars[rng.random_range(0..n)];
        match rng.random_range(0..10) {
            0..=5 => stmts.push(Stmt::assign(v, lin(&mut rng, &vars))),
            6..=7 => {
                let op = [BinOp::Lt, BinOp::Le, BinOp::Eq, BinOp::Ne, BinOp::Ge][rng.random_range(0..5)];
                stmts.push(Stmt::Assume(Expr::binary(op, lin(&mut rng, &vars), Expr::Int(0))));
            }
            _ if !havoced && stmts.len() + 2 <= len.max(2) => {
                havoced = true;
                stmts.push(Stmt::Havoc(v.to_string()));
                let boxed = Expr::and(
                    Expr::binary(BinOp::Ge, Expr::var(v), Expr::Int(-SP_BOX)),
                    Expr::binary(BinOp::Le, Expr::var(v), Expr::Int(SP_BOX)),
                );
                stmts.push(Stmt::Assume(boxed));
            }
            _ => stmts.push(Stmt::assign(v, Expr::var(vars[rng.random_range(0..n)]))),
        }
    }
    (vars.iter().map(|s| s.to_string()).collect(), stmts)
}

pub fn box_pred(vars: &[String]) -> Predicate {
    Predicate::from_expr(Expr::conjoin(vars.iter().flat_map(|v| {
        [
            Expr::binary(BinOp::Ge, Expr::var(v.as_str()), Expr::Int(-SP_BOX)),
            Expr::binary(BinOp::Le, Expr::var(v.as_str()), Expr::Int(SP_BOX)),
        ]
    })))
}

/// Final states reachable from the box through `stmts`, by execution.
pub fn reachable(vars: &[String], stmts: &[Stmt]) -> BTreeSet<Vec<i64>> {
    let havocs = count_havocs(stmts);
    let names: Vec<String> = (0..havocs).map(|i| format!("h{i}")).collect();
    let choice_sets: Vec<Vec<i64>> = grid(&names, -SP_BOX, SP_BOX).into_iter().map(|g| g.into_values().collect()).collect();
    let mut out = BTreeSet::new();
    for s0 in grid(vars, -SP_BOX, SP_BOX) {
        for choices in &choice_sets {
            let mut ignore = |_: LoopId, _: &St| {};
            if let End::Done(s) = Exec::new(choices.clone(), usize::MAX, &mut ignore).run(stmts, s0.clone()) {
                out.insert(vars.iter().map(|v| s[v]).collect());
            }
        }
    }
    out
}

fn point(vars: &[String], vals: &[i64]) -> Expr {
    Expr::conjoin(vars.iter().zip(vals).map(|(v, k)| Expr::binary(BinOp::Eq, Expr::var(v.as_str()), Expr::Int(*k))))
}

/// `Ok(())` when `sp(box, stmts)` denotes exactly the reachable set.
pub fn sp_agrees(solver: &Solver, vars: &[String], stmts: &[Stmt]) -> Result<(), String> {
    let sp = strongest_post(&box_pred(vars), stmts).map_err(|e| format!("sp failed: {e}"))?;
    denotes(solver, vars, &sp, &reachable(vars, stmts))
}

/// Whether `p` (free in `vars`, other symbols existential) denotes exactly
/// `r`. Two queries: `p && !r` must be unsatisfiable, and every point of
/// `r`, each with its own copy of the existential symbols, must satisfy `p`.
pub fn denotes(solver: &Solver, vars: &[String], p: &Predicate, r: &BTreeSet<Vec<i64>>) -> Result<(), String> {
    let not_r = Expr::conjoin(r.iter().map(|vals| point(vars, vals).negate()));
    let q1 = SmtScript::new(vec![p.clone(), Predicate::from_expr(not_r)], &BTreeSet::new(), false);
    match solver.check(&q1).status {
        SolverStatus::Unsat => {}
        other => return Err(format!("admits an unreachable state ({other:?}); predicate = {p}")),
    }
    let program_vars: BTreeSet<&str> = vars.iter().map(String::as_str).collect();
    let copies: Vec<Predicate> = r
        .iter()
        .enumerate()
        .map(|(i, vals)| {
            let at: BTreeMap<&str, i64> = vars.iter().map(String::as_str).zip(vals.iter().copied()).collect();
            Predicate::from_expr(p.expr().rename(&|name| match at.get(name) {
                Some(k) => Some(Expr::Int(*k)),
                None if !program_vars.contains(name) => Some(Expr::var(format!("{name}_c{i}"))),
                None => None,
            }))
        })
        .collect();
    let q2 = SmtScript::new(copies, &BTreeSet::new(), false);
    match solver.check(&q2).status {
        SolverStatus::Sat => Ok(()),
        other => Err(format!("misses a reachable state ({other:?}); predicate = {p}")),
    }
}

// ---------------------------------------------------------- paths oracle

/// One region as recovered by the oracle.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SegmentView {
    pub region: String,
    pub assumed: Vec<String>,
    pub stmts: Vec<String>,
    pub depth: usize,
}

pub fn views(ps: &PathSet) -> BTreeSet<SegmentView> {
    ps.segments
        .iter()
        .map(|s| SegmentView {
            region: s.region.to_string(),
            assumed: s.assumed.iter().map(|e| e.to_string()).collect(),
            stmts: s.stmts.iter().map(|e| e.to_string()).collect(),
            depth: s.depth,
        })
        .collect()
}

/// Every simple path from entry to exit. A path that enters a nested loop
/// body can only leave it through the header again, so simple paths skip
/// nested bodies.
fn simple_paths(g: &Cfg) -> Vec<Vec<usize>> {
    fn dfs(g: &Cfg, node: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node == g.exit {
            out.push(path.clone());
            return;
        }
        for &next in &g.node(node).successors {
            if !path.contains(&next) {
                path.push(next);
                dfs(g, next, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    dfs(g, g.entry, &mut vec![g.entry], &mut out);
    out
}

/// Segments by simple-path search: a region's own statements are those of
/// the basic blocks on every entry-to-exit path, and the nested regions
/// are the headers and branches on every path.
pub fn dfs_segments(g: &Cfg) -> BTreeSet<SegmentView> {
    let mut out = BTreeSet::new();
    dfs_region(g, "top".into(), Vec::new(), 0, &mut out);
    out
}

fn dfs_region(g: &Cfg, region: String, assumed: Vec<Expr>, depth: usize, out: &mut BTreeSet<SegmentView>) {
    let paths = simple_paths(g);
    let first = paths.first().expect("region has an entry-to-exit path");
    let on_all: Vec<usize> = first.iter().copied().filter(|n| paths.iter().all(|p| p.contains(n))).collect();
    let mut stmts = Vec::new();
    for &n in &on_all {
        match &g.node(n).kind {
            NodeKind::Basic(b) => stmts.extend(b.iter().map(|s| s.to_string())),
            NodeKind::LoopHeader { cond, loop_id } => {
                let body = extract_loop_cfg(g, n).expect("header");
                let mut a = assumed.clone();
                a.push(cond.clone());
                dfs_region(&body, Region::Loop(*loop_id).to_string(), a, depth + 1, out);
            }
            NodeKind::Branch(cond) => {
                let (t, f) = branch_sub_cfgs(g, n).expect("branch");
                let orig = g.original_id(n).unwrap_or(n);
                for (arm, polarity) in [(t, true), (f, false)] {
                    let mut a = assumed.clone();
                    a.push(if polarity { cond.clone() } else { cond.clone().negate() });
                    dfs_region(&arm, Region::BranchArm { branch: orig, polarity }.to_string(), a, depth + 1, out);
                }
            }
            NodeKind::Entry | NodeKind::Exit => {}
        }
    }
    out.insert(SegmentView { region, assumed: assumed.iter().map(|e| e.to_string()).collect(), stmts, depth });
}
