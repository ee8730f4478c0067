//! The generate/check/refine loop for one loop's invariant.
//!
//! Combinor mode: single clauses, then a Houdini pass over the whole store
//! (the largest inductive conjunction), greedily minimized when it is valid.
//! A valid conjunction of store clauses is always a subset of the Houdini
//! result, so when that result fails only on the post, no conjunction can
//! succeed and enumeration moves on to disjunctions.

use std::time::{Duration, Instant};

use log::{debug, warn};

use super::combine::{Combinor, Phase};
use super::llm::{LlmClient, PromptContext, PromptKind};
use super::{filter_by_ces, seed_clauses, Candidate, CandidateOrigin, CeSet, ClauseSource, ExprStore, GenMode, GeneratorBudget};
use crate::hoare::{check_invariant, revalidate, CeKind, HoareProblem, Verdict, VerdictStatus};
use crate::logic::Clause;
use crate::smt::Solver;

/// At most this many failed candidates are kept for the report.
const KEPT_FAILURES: usize = 5;
/// Bound on the audit trail kept under `record_filtered`.
pub const MAX_RECORDED_FILTERED: usize = 4096;

pub struct InferOptions<'a> {
    pub mode: GenMode,
    pub budget: GeneratorBudget,
    /// Prune candidates against the counterexample set before solving.
    pub filter: bool,
    /// Keep the first [`MAX_RECORDED_FILTERED`] candidates the filter drops,
    /// for auditing.
    pub record_filtered: bool,
    pub llm: Option<&'a LlmClient>,
    pub prompt: Option<&'a PromptContext>,
    /// First prompt to send in llm and hybrid modes.
    pub first_prompt: PromptKind,
}

impl InferOptions<'_> {
    pub fn combinor(budget: GeneratorBudget) -> InferOptions<'static> {
        InferOptions {
            mode: GenMode::Combinor,
            budget,
            filter: true,
            record_filtered: false,
            llm: None,
            prompt: None,
            first_prompt: PromptKind::Initial,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Found { candidate: Candidate, verdict: Verdict },
    Exhausted { best_failures: Vec<(Candidate, VerdictStatus)> },
}

#[derive(Debug, Clone)]
pub struct InferResult {
    pub outcome: Outcome,
    /// Solver-checked candidates plus LLM requests.
    pub rounds: usize,
    pub queries: u64,
    pub ces: CeSet,
    pub filtered: Vec<Candidate>,
    pub llm_calls: usize,
    /// Last LLM error, if any request failed.
    pub llm_error: Option<String>,
}

impl InferResult {
    pub fn found(&self) -> Option<&Candidate> {
        match &self.outcome {
            Outcome::Found { candidate, .. } => Some(candidate),
            Outcome::Exhausted { .. } => None,
        }
    }
}

enum Houdini {
    Valid(Vec<usize>, Verdict),
    /// The largest inductive subset fails its obligations.
    TermFail,
    /// Budget, solver trouble, or a counterexample that did not replay.
    GaveUp,
}

struct Engine<'a> {
    hp: &'a HoareProblem,
    solver: &'a Solver,
    opts: &'a InferOptions<'a>,
    deadline: Instant,
    ces: CeSet,
    rounds: usize,
    queries: u64,
    filtered: Vec<Candidate>,
    failures: Vec<(Candidate, VerdictStatus)>,
    llm_calls: usize,
    llm_error: Option<String>,
}

impl<'a> Engine<'a> {
    fn budget_left(&self) -> bool {
        self.rounds < self.opts.budget.max_rounds && Instant::now() < self.deadline
    }

    /// Solver check of one candidate; records the counterexample if it
    /// replays concretely.
    fn check(&mut self, cand: &Candidate) -> Verdict {
        self.rounds += 1;
        let v = check_invariant(self.solver, self.hp, &cand.formula);
        self.queries += v.queries;
        debug!("loop {} round {}: {} -> {}", self.hp.loop_id, self.rounds, cand.formula, v.status.name());
        if let Some(ce) = &v.counterexample {
            if revalidate(self.hp, &cand.formula, ce) {
                self.ces.insert(ce.clone());
            } else {
                warn!("counterexample for `{}` did not replay; not recorded", cand.formula);
            }
        }
        if !v.is_valid() {
            let keep_term = matches!(v.status, VerdictStatus::TermFail);
            if self.failures.len() < KEPT_FAILURES {
                self.failures.push((cand.clone(), v.status.clone()));
            } else if keep_term {
                // Prefer near misses: candidates that passed init and preserve.
                if let Some(slot) = self.failures.iter().position(|(_, s)| !matches!(s, VerdictStatus::TermFail)) {
                    self.failures[slot] = (cand.clone(), v.status.clone());
                }
            }
        }
        v
    }

    fn skip(&mut self, cand: Candidate) {
        if self.opts.record_filtered {
            self.filtered.push(cand);
        }
    }

    fn combos(&mut self, clauses: &[Clause], phases: &[Phase], origin: CandidateOrigin) -> Option<(Candidate, Verdict)> {
        let mut comb = Combinor::new(clauses.to_vec(), self.opts.budget.max_combination_size, phases, origin);
        comb.set_filter(self.opts.filter);
        while self.budget_left() {
            let generation = self.rounds + 1;
            let mut skipped = Vec::new();
            let room = if self.opts.record_filtered { MAX_RECORDED_FILTERED.saturating_sub(self.filtered.len()) } else { 0 };
            let shape = comb.next_shape_with(&self.ces, |c, s| {
                if skipped.len() < room {
                    skipped.push(c.candidate(s, generation));
                }
            });
            skipped.into_iter().for_each(|c| self.skip(c));
            let cand = comb.candidate(&shape?, generation);
            let v = self.check(&cand);
            if v.is_valid() {
                return Some((cand, v));
            }
        }
        None
    }

    fn conj(&self, clauses: &[Clause], idx: &[usize], origin: CandidateOrigin) -> Candidate {
        Candidate::conjunction(idx.iter().map(|&i| clauses[i].clone()).collect(), self.rounds + 1, origin)
    }

    fn houdini(&mut self, clauses: &[Clause], origin: CandidateOrigin) -> (Houdini, Option<CeKind>) {
        let mut keep: Vec<usize> = (0..clauses.len()).collect();
        let mut first_failure = None;
        loop {
            if !self.budget_left() {
                return (Houdini::GaveUp, first_failure);
            }
            let cand = self.conj(clauses, &keep, origin);
            let v = self.check(&cand);
            let Some(ce) = v.counterexample.clone() else {
                return match v.status {
                    VerdictStatus::Valid => (Houdini::Valid(keep, v), first_failure),
                    _ => (Houdini::GaveUp, first_failure),
                };
            };
            first_failure.get_or_insert(ce.kind);
            if !revalidate(self.hp, &cand.formula, &ce) {
                return (Houdini::GaveUp, first_failure);
            }
            let probe = match ce.kind {
                CeKind::Init => ce.state.clone(),
                CeKind::Preserve => ce.post_state.clone().unwrap_or_default(),
                CeKind::Term => return (Houdini::TermFail, first_failure),
            };
            let before = keep.len();
            keep.retain(|&i| clauses[i].eval(|v| probe.get(v).copied()) != Some(false));
            if keep.len() == before {
                return (Houdini::GaveUp, first_failure);
            }
        }
    }

    /// Drops clauses from a valid conjunction while it stays valid, last
    /// store clause first.
    fn minimize(&mut self, clauses: &[Clause], mut keep: Vec<usize>, mut verdict: Verdict, origin: CandidateOrigin) -> (Candidate, Verdict) {
        for pos in (0..keep.len()).rev() {
            if keep.len() == 1 || !self.budget_left() {
                break;
            }
            let mut trial = keep.clone();
            trial.remove(pos);
            let cand = self.conj(clauses, &trial, origin);
            if self.opts.filter && !filter_by_ces(&cand, &self.ces) {
                self.skip(cand);
                continue;
            }
            let v = self.check(&cand);
            if v.is_valid() {
                keep = trial;
                verdict = v;
            }
        }
        (self.conj(clauses, &keep, origin), verdict)
    }

    fn pipeline(&mut self, store: &ExprStore, origin: CandidateOrigin) -> Option<(Candidate, Verdict)> {
        let clauses = store.clauses();
        if let Some(found) = self.combos(clauses, &[Phase::Singles], origin) {
            return Some(found);
        }
        let conj_possible = match self.houdini(clauses, origin).0 {
            Houdini::Valid(keep, v) => return Some(self.minimize(clauses, keep, v, origin)),
            Houdini::TermFail => false,
            Houdini::GaveUp => true,
        };
        if conj_possible {
            if let Some(found) = self.combos(clauses, &[Phase::Conjunctions], origin) {
                return Some(found);
            }
        }
        self.combos(clauses, &[Phase::Disjunctions], origin)
    }

    fn ask_llm(&mut self, kind: PromptKind) -> Option<Vec<Clause>> {
        let (Some(llm), Some(ctx)) = (self.opts.llm, self.opts.prompt) else {
            self.llm_error = Some("llm mode needs an LLM client and a prompt context".into());
            return None;
        };
        self.llm_calls += 1;
        self.rounds += 1;
        match llm.generate(kind, ctx, &self.ces, &self.hp.vars, self.opts.budget.max_clauses_per_round) {
            Ok(cs) => Some(cs),
            Err(e) => {
                warn!("loop {}: {e}", self.hp.loop_id);
                self.llm_error = Some(e.to_string());
                None
            }
        }
    }

    fn llm_loop(&mut self) -> Option<(Candidate, Verdict)> {
        let mut store = ExprStore::new();
        let mut kind = self.opts.first_prompt;
        while self.budget_left() {
            let Some(new) = self.ask_llm(kind) else {
                if matches!(&self.llm_error, Some(e) if e.contains("transport")) {
                    return None;
                }
                continue;
            };
            new.into_iter().for_each(|c| {
                store.insert(c, ClauseSource::Llm);
            });
            let clauses = store.clauses().to_vec();
            match self.houdini(&clauses, CandidateOrigin::Llm) {
                (Houdini::Valid(keep, v), _) => return Some(self.minimize(&clauses, keep, v, CandidateOrigin::Llm)),
                (_, Some(first)) => kind = PromptKind::after(first),
                (_, None) => {}
            }
        }
        None
    }

    fn hybrid(&mut self) -> Option<(Candidate, Verdict)> {
        let seeded = seed_clauses(self.hp);
        let mut llm_store = ExprStore::new();
        if self.budget_left() {
            if let Some(cs) = self.ask_llm(self.opts.first_prompt) {
                cs.into_iter().for_each(|c| {
                    llm_store.insert(c, ClauseSource::Llm);
                });
            }
        }
        self.pipeline(&seeded.prepended(&llm_store), CandidateOrigin::Combinor)
    }
}

/// Search for a valid invariant of `hp`. Exhaustion is a value, not an error.
pub fn infer_invariant(hp: &HoareProblem, solver: &Solver, opts: &InferOptions<'_>) -> InferResult {
    let mut e = Engine {
        hp,
        solver,
        opts,
        deadline: Instant::now() + Duration::from_millis(opts.budget.total_timeout_ms),
        ces: CeSet::new(),
        rounds: 0,
        queries: 0,
        filtered: Vec::new(),
        failures: Vec::new(),
        llm_calls: 0,
        llm_error: None,
    };
    let found = match opts.mode {
        GenMode::Combinor => {
            let store = seed_clauses(hp);
            if store.is_empty() {
                None
            } else {
                e.pipeline(&store, CandidateOrigin::Combinor)
            }
        }
        GenMode::Llm => e.llm_loop(),
        GenMode::Hybrid => e.hybrid(),
    };
    let outcome = match found {
        Some((candidate, verdict)) => Outcome::Found { candidate, verdict },
        None => Outcome::Exhausted { best_failures: std::mem::take(&mut e.failures) },
    };
    InferResult {
        outcome,
        rounds: e.rounds,
        queries: e.queries,
        ces: e.ces,
        filtered: e.filtered,
        llm_calls: e.llm_calls,
        llm_error: e.llm_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build_cfg;
    use crate::frontend::{parse_formula, parse_program, LoopId};
    use crate::hoare::{build_problem, Summaries};
    use crate::logic::Predicate;
    use crate::smt::SolverConfig;

    const COUNT_UP: &str = "//@ pre: n >= 0\n//@ post: x == n\nint x, n; x = 0; while (x < n) { x = x + 1; }";

    fn solver() -> Solver {
        Solver::new(SolverConfig::discover(None, 10_000).expect("these tests need z3 or cvc5 on PATH"))
    }

    fn problem(src: &str) -> HoareProblem {
        let p = parse_program(src).unwrap();
        build_problem(&p, &build_cfg(&p), LoopId(0), &Summaries::new()).unwrap()
    }

    fn equivalent(s: &Solver, a: &Predicate, b: &str) -> bool {
        let b = Predicate::new(parse_formula(b).unwrap()).unwrap();
        let both = crate::logic::implies(a, &b);
        let back = crate::logic::implies(&b, a);
        s.check(&both.script).status == crate::smt::SolverStatus::Unsat && s.check(&back.script).status == crate::smt::SolverStatus::Unsat
    }

    #[test]
    fn count_up_finds_x_le_n() {
        let s = solver();
        let r = infer_invariant(&problem(COUNT_UP), &s, &InferOptions::combinor(GeneratorBudget::default()));
        let cand = r.found().expect("count-up is solvable");
        assert!(equivalent(&s, &cand.formula, "x <= n"), "{}", cand.formula);
        assert!(r.rounds <= 50, "{} candidates checked", r.rounds);
    }

    #[test]
    fn zero_rounds_is_exhausted() {
        let budget = GeneratorBudget { max_rounds: 0, ..Default::default() };
        let r = infer_invariant(&problem(COUNT_UP), &solver(), &InferOptions::combinor(budget));
        assert!(matches!(r.outcome, Outcome::Exhausted { .. }));
        assert_eq!(r.queries, 0);
    }

    #[test]
    fn houdini_and_minimize_find_conjunction() {
        // Needs both `x <= n` and `y == x`.
        let src = "//@ pre: n >= 0\n//@ post: y == n\nint x, y, n; x = 0; y = 0; while (x < n) { x = x + 1; y = y + 1; }";
        let s = solver();
        let r = infer_invariant(&problem(src), &s, &InferOptions::combinor(GeneratorBudget::default()));
        let cand = r.found().expect("solvable by conjunction");
        assert!(check_invariant(&s, &problem(src), &cand.formula).is_valid());
        assert_eq!(cand.clauses_used.len(), 2, "{}", cand.formula);
    }
}
