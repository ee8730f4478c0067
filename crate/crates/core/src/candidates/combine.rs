//! The Combinor: candidate shapes in increasing size, pruned against the
//! counterexample set with cached per-clause bitsets.

use itertools::Itertools;

use super::{Candidate, CandidateOrigin, CeSet, ExprStore, GeneratorBudget};
use crate::frontend::Expr;
use crate::hoare::CeKind;
use crate::interp::State;
use crate::logic::{Clause, Predicate};

/// Indices into the Combinor's clause list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Conj(Vec<usize>),
    /// `(∧ left) ∨ (∧ right)`, with disjoint sides.
    Disj(Vec<usize>, Vec<usize>),
}

impl Shape {
    pub fn size(&self) -> usize {
        match self {
            Shape::Conj(c) => c.len(),
            Shape::Disj(a, b) => a.len() + b.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Singles,
    /// Conjunctions of 2..=max clauses.
    Conjunctions,
    /// 2-way disjunctions of conjunctions, 2..=max clauses in total.
    Disjunctions,
}

fn shapes(n: usize, max: usize, phase: Phase) -> Box<dyn Iterator<Item = Shape>> {
    match phase {
        Phase::Singles => Box::new((0..n).map(|i| Shape::Conj(vec![i]))),
        Phase::Conjunctions => Box::new((2..=max).flat_map(move |k| (0..n).combinations(k)).map(Shape::Conj)),
        Phase::Disjunctions => Box::new((2..=max).flat_map(move |total| {
            (1..=total / 2).flat_map(move |a| {
                let b = total - a;
                (0..n).combinations(a).flat_map(move |left| {
                    (0..n).combinations(b).filter_map(move |right| {
                        let disjoint = right.iter().all(|i| !left.contains(i));
                        (disjoint && (a < b || left < right)).then(|| Shape::Disj(left.clone(), right))
                    })
                })
            })
        })),
    }
}

/// Bit `j` of each vector refers to counterexample `j`.
#[derive(Debug, Default)]
struct Bits {
    pre: Vec<u64>,
    post: Vec<u64>,
    /// Evaluation succeeded (all variables bound).
    known_pre: Vec<u64>,
    known_post: Vec<u64>,
}

#[derive(Debug, Default)]
struct EvalCache {
    synced: usize,
    per_clause: Vec<Bits>,
    init: Vec<u64>,
    preserve: Vec<u64>,
    term: Vec<u64>,
}

fn set(v: &mut Vec<u64>, j: usize, on: bool) {
    if v.len() <= j / 64 {
        v.resize(j / 64 + 1, 0);
    }
    if on {
        v[j / 64] |= 1 << (j % 64);
    }
}

fn word(v: &[u64], w: usize) -> u64 {
    v.get(w).copied().unwrap_or(0)
}

impl EvalCache {
    fn sync(&mut self, clauses: &[Clause], ces: &CeSet) {
        if self.per_clause.len() < clauses.len() {
            self.per_clause.resize_with(clauses.len(), Bits::default);
        }
        let eval = |c: &Clause, s: &State| c.eval(|v| s.get(v).copied());
        for (j, ce) in ces.entries().iter().enumerate().skip(self.synced) {
            set(&mut self.init, j, ce.kind == CeKind::Init);
            set(&mut self.preserve, j, ce.kind == CeKind::Preserve);
            set(&mut self.term, j, ce.kind == CeKind::Term);
            for (c, bits) in clauses.iter().zip(&mut self.per_clause) {
                let pre = eval(c, &ce.state);
                set(&mut bits.pre, j, pre == Some(true));
                set(&mut bits.known_pre, j, pre.is_some());
                let post = ce.post_state.as_ref().and_then(|p| eval(c, p));
                set(&mut bits.post, j, post == Some(true));
                set(&mut bits.known_post, j, post.is_some());
            }
        }
        self.synced = ces.len();
    }

    /// Truth and definedness of a conjunction at word `w`.
    fn conj(&self, idx: &[usize], w: usize) -> (u64, u64, u64, u64) {
        let mut acc = (!0u64, !0u64, !0u64, !0u64);
        for &i in idx {
            let b = &self.per_clause[i];
            acc.0 &= word(&b.pre, w);
            acc.1 &= word(&b.post, w);
            acc.2 &= word(&b.known_pre, w);
            acc.3 &= word(&b.known_post, w);
        }
        acc
    }

    /// True when the shape is refuted by some counterexample.
    fn refuted(&self, shape: &Shape) -> bool {
        let words = self.synced.div_ceil(64);
        (0..words).any(|w| {
            let (pre, post, kp, kq) = match shape {
                Shape::Conj(c) => self.conj(c, w),
                Shape::Disj(a, b) => {
                    let (l, r) = (self.conj(a, w), self.conj(b, w));
                    (l.0 | r.0, l.1 | r.1, l.2 & r.2, l.3 & r.3)
                }
            };
            let init = word(&self.init, w) & kp & !pre;
            let preserve = word(&self.preserve, w) & kp & kq & pre & !post;
            let term = word(&self.term, w) & kp & pre;
            (init | preserve | term) != 0
        })
    }
}

/// Enumerates candidates over a fixed clause list, phase by phase. With the
/// filter on, shapes refuted by the counterexample set are skipped.
pub struct Combinor {
    clauses: Vec<Clause>,
    origin: CandidateOrigin,
    max_size: usize,
    phases: Vec<Phase>,
    current: Option<Box<dyn Iterator<Item = Shape>>>,
    cache: EvalCache,
    filter: bool,
    skipped: usize,
}

impl Combinor {
    pub fn new(clauses: Vec<Clause>, max_size: usize, phases: &[Phase], origin: CandidateOrigin) -> Combinor {
        Combinor {
            clauses,
            origin,
            max_size,
            phases: phases.iter().rev().copied().collect(),
            current: None,
            cache: EvalCache::default(),
            filter: true,
            skipped: 0,
        }
    }

    pub fn set_filter(&mut self, on: bool) {
        self.filter = on;
    }

    /// Shapes skipped by the filter so far.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn candidate(&self, shape: &Shape, generation: usize) -> Candidate {
        let conj = |idx: &[usize]| Expr::conjoin(idx.iter().map(|&i| self.clauses[i].to_expr()));
        let (formula, used) = match shape {
            Shape::Conj(c) => (conj(c), c.clone()),
            Shape::Disj(a, b) => (Expr::or(conj(a), conj(b)), a.iter().chain(b).copied().collect()),
        };
        Candidate {
            formula: Predicate::from_expr(formula),
            clauses_used: used.iter().map(|&i| self.clauses[i].clone()).collect(),
            generation,
            origin: self.origin,
        }
    }

    fn next_shape(&mut self) -> Option<Shape> {
        loop {
            if let Some(s) = self.current.as_mut().and_then(|it| it.next()) {
                return Some(s);
            }
            let phase = self.phases.pop()?;
            self.current = Some(shapes(self.clauses.len(), self.max_size, phase));
        }
    }

    /// The next shape that survives the filter. `on_skip` sees every shape
    /// the filter drops.
    pub fn next_shape_with(&mut self, ces: &CeSet, mut on_skip: impl FnMut(&Combinor, &Shape)) -> Option<Shape> {
        if self.filter {
            self.cache.sync(&self.clauses, ces);
        }
        loop {
            let shape = self.next_shape()?;
            if self.filter && self.cache.refuted(&shape) {
                self.skipped += 1;
                on_skip(self, &shape);
                continue;
            }
            return Some(shape);
        }
    }

    pub fn next_candidate(&mut self, ces: &CeSet, generation: usize) -> Option<Candidate> {
        let shape = self.next_shape_with(ces, |_, _| {})?;
        Some(self.candidate(&shape, generation))
    }

    /// Whether `shape` is refuted by `ces`, regardless of the filter toggle.
    pub fn refutes(&mut self, ces: &CeSet, shape: &Shape) -> bool {
        self.cache.sync(&self.clauses, ces);
        self.cache.refuted(shape)
    }
}

/// Every phase over the whole store.
pub fn combine(store: &ExprStore, budget: &GeneratorBudget) -> Combinor {
    Combinor::new(
        store.clauses().to_vec(),
        budget.max_combination_size,
        &[Phase::Singles, Phase::Conjunctions, Phase::Disjunctions],
        CandidateOrigin::Combinor,
    )
}
