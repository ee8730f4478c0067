//! Inner-first summarization of a program and the final whole-program pass.
//!
//! Loops are inferred in priority order (innermost first, then by source
//! position) and each verified invariant becomes the summary used wherever
//! that loop appears on another loop's paths. Branch arms get exact sp
//! summaries. `Context::pre_cond` accumulates these facts for reporting and
//! prompting; the verification conditions themselves come from
//! [`build_problem`], which threads summaries through real program paths.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::candidates::{infer_invariant, CeSet, GenMode, GeneratorBudget, InferOptions, LlmClient, Outcome, PromptContext, PromptKind};
use crate::cfg::{build_cfg, Cfg, NodeId};
use crate::frontend::{pretty_print, AnnotationKind, LoopId, Program};
use crate::hoare::{build_problem, check_invariant, check_program_obligations, program_obligations, Counterexample, HoareError, HoareProblem, Summaries, Verdict, VerdictStatus};
use crate::logic::{strongest_post, LogicError, Predicate};
use crate::paths::{find_all_paths, order_by_priority, PathSegment, PathSet, Region};
use crate::smt::Solver;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SummarizeError {
    #[error("no invariant found for {0}")]
    SummarizationFailed(Region),
    #[error(transparent)]
    Hoare(#[from] HoareError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryOrigin {
    Combinor,
    Llm,
    Sp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub region: Region,
    pub predicate: Predicate,
    /// `Some` and valid for loops; branch summaries are exact by construction.
    pub verdict: Option<Verdict>,
    pub origin: SummaryOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LoopStatus {
    Solved,
    Exhausted,
    Error,
}

/// Inference bookkeeping for one loop.
#[derive(Debug, Clone)]
pub struct LoopRecord {
    pub status: LoopStatus,
    pub rounds: usize,
    pub refinement_rounds: usize,
    pub queries: u64,
    pub time_ms: u64,
    pub ces: CeSet,
    pub note: Option<String>,
    /// The problem of the latest attempt; combinor search is deterministic,
    /// so an unchanged problem is not retried.
    pub problem: Option<HoareProblem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    LoopInference { loop_id: LoopId, loop_depth: usize },
    BranchJoin { branch: NodeId, branch_depth: usize },
    Straight { region: Region },
}

#[derive(Debug, Clone)]
pub struct Context {
    pub pre_cond: Predicate,
    pub loop_stack: Vec<LoopId>,
    pub branch_stack: Vec<NodeId>,
    /// Only verified loop invariants and sp-derived branch summaries.
    pub summaries: BTreeMap<Region, Summary>,
    pub program_text: String,
    pub records: BTreeMap<LoopId, LoopRecord>,
    pub failures: Vec<SummarizeError>,
    pub trace: Vec<TraceEvent>,
}

impl Context {
    pub fn new(p: &Program) -> Context {
        Context {
            pre_cond: Predicate::from_expr(p.precondition()),
            loop_stack: Vec::new(),
            branch_stack: Vec::new(),
            summaries: BTreeMap::new(),
            program_text: prompt_text(p),
            records: BTreeMap::new(),
            failures: Vec::new(),
            trace: Vec::new(),
        }
    }

    /// Loop summaries for problem construction; loops without a verified
    /// invariant contribute `true`.
    pub fn loop_summaries(&self, p: &Program) -> Summaries {
        p.loops()
            .into_iter()
            .filter_map(|s| match s {
                crate::frontend::Stmt::While { loop_id, .. } => Some(*loop_id),
                _ => None,
            })
            .map(|id| {
                let inv = self.summaries.get(&Region::Loop(id)).map(|s| s.predicate.clone()).unwrap_or_else(Predicate::tt);
                (id, inv)
            })
            .collect()
    }

    fn summary_lines(&self, except: LoopId) -> String {
        let lines: Vec<String> = self
            .summaries
            .values()
            .filter(|s| matches!(s.region, Region::Loop(id) if id != except))
            .map(|s| format!("{}: {}", s.region, s.predicate))
            .collect();
        if lines.is_empty() {
            "none".into()
        } else {
            lines.join("\n")
        }
    }
}

/// The program as shown to an LLM: gold invariants removed.
fn prompt_text(p: &Program) -> String {
    let mut q = p.clone();
    q.annotations.retain(|a| !matches!(a.kind, AnnotationKind::GoldInvariant(_)));
    pretty_print(&q)
}

/// `sp(pre && assumed..., stmts)` for a straight-line segment.
pub fn compute_invariant(segment: &PathSegment, pre: &Predicate) -> Result<Predicate, LogicError> {
    let assumed = segment.assumed.iter().map(|e| Predicate::from_expr(e.clone()));
    let start = Predicate::conjoin(std::iter::once(pre).chain(assumed.collect::<Vec<_>>().iter()));
    strongest_post(&start, &segment.stmts)
}

/// Search settings shared by every loop of a program.
#[derive(Clone, Copy)]
pub struct PipelineOptions<'a> {
    pub mode: GenMode,
    pub budget: GeneratorBudget,
    pub filter: bool,
    pub llm: Option<&'a LlmClient>,
}

impl PipelineOptions<'_> {
    pub fn combinor(budget: GeneratorBudget) -> PipelineOptions<'static> {
        PipelineOptions { mode: GenMode::Combinor, budget, filter: true, llm: None }
    }
}

fn prompt_context(ctx: &Context, hp: &HoareProblem) -> PromptContext {
    PromptContext {
        program: ctx.program_text.clone(),
        loop_id: hp.loop_id,
        pre: hp.pre.to_string(),
        guard: hp.guard.to_string(),
        post: hp.post.to_string(),
        summaries: ctx.summary_lines(hp.loop_id),
    }
}

struct Inferred {
    invariant: Option<(Predicate, Verdict, SummaryOrigin)>,
    rounds: usize,
    queries: u64,
    ces: CeSet,
    note: Option<String>,
}

fn infer_loop(ctx: &Context, hp: &HoareProblem, solver: &Solver, opts: &PipelineOptions<'_>, first_prompt: PromptKind) -> Inferred {
    let prompt = prompt_context(ctx, hp);
    let io = InferOptions {
        mode: opts.mode,
        budget: opts.budget,
        filter: opts.filter,
        record_filtered: false,
        llm: opts.llm,
        prompt: Some(&prompt),
        first_prompt,
    };
    let r = infer_invariant(hp, solver, &io);
    let invariant = match r.outcome {
        Outcome::Found { candidate, verdict } => {
            let origin = match candidate.origin {
                crate::candidates::CandidateOrigin::Combinor => SummaryOrigin::Combinor,
                crate::candidates::CandidateOrigin::Llm => SummaryOrigin::Llm,
            };
            Some((candidate.formula, verdict, origin))
        }
        Outcome::Exhausted { .. } => None,
    };
    Inferred { invariant, rounds: r.rounds, queries: r.queries, ces: r.ces, note: r.llm_error }
}

/// Walk the ordered segments, inferring loop invariants and summarizing
/// branches and straight-line code into `ctx.pre_cond`.
pub fn hierarch_summarize(p: &Program, g: &Cfg, ps: &PathSet, mut ctx: Context, solver: &Solver, opts: &PipelineOptions<'_>) -> Context {
    let mut joined = BTreeSet::new();
    for seg in &ps.segments {
        match seg.region {
            Region::Loop(id) => {
                for r in &seg.enclosing {
                    if let Region::Loop(outer) = r {
                        ctx.loop_stack.push(*outer);
                    }
                }
                ctx.loop_stack.push(id);
                ctx.trace.push(TraceEvent::LoopInference { loop_id: id, loop_depth: ctx.loop_stack.len() });
                summarize_loop(p, g, id, &mut ctx, solver, opts);
                ctx.loop_stack.clear();
            }
            Region::BranchArm { branch, .. } => {
                if !joined.insert(branch) {
                    continue;
                }
                ctx.branch_stack.push(branch);
                ctx.trace.push(TraceEvent::BranchJoin { branch, branch_depth: ctx.branch_stack.len() });
                let arms: Vec<&PathSegment> = ps
                    .segments
                    .iter()
                    .filter(|s| matches!(s.region, Region::BranchArm { branch: b, .. } if b == branch))
                    .collect();
                let mut invs = Vec::new();
                for arm in arms {
                    match compute_invariant(arm, &Predicate::tt()) {
                        Ok(inv) => {
                            ctx.summaries.insert(
                                arm.region,
                                Summary { region: arm.region, predicate: inv.clone(), verdict: None, origin: SummaryOrigin::Sp },
                            );
                            invs.push(inv);
                        }
                        Err(e) => ctx.failures.push(SummarizeError::Hoare(HoareError::Logic(e))),
                    }
                }
                if let [t, f] = invs.as_slice() {
                    ctx.pre_cond = ctx.pre_cond.and(&t.or(f));
                }
                ctx.branch_stack.pop();
            }
            Region::TopLevel => {
                ctx.trace.push(TraceEvent::Straight { region: seg.region });
                match compute_invariant(seg, &ctx.pre_cond) {
                    Ok(inv) => ctx.pre_cond = inv,
                    Err(e) => ctx.failures.push(SummarizeError::Hoare(HoareError::Logic(e))),
                }
            }
        }
    }
    debug_assert!(ctx.loop_stack.is_empty() && ctx.branch_stack.is_empty());
    ctx
}

fn summarize_loop(p: &Program, g: &Cfg, id: LoopId, ctx: &mut Context, solver: &Solver, opts: &PipelineOptions<'_>) {
    let start = Instant::now();
    let hp = match build_problem(p, g, id, &ctx.loop_summaries(p)) {
        Ok(hp) => hp,
        Err(e) => {
            ctx.records.insert(id, LoopRecord {
                status: LoopStatus::Error,
                rounds: 0,
                refinement_rounds: 0,
                queries: 0,
                time_ms: start.elapsed().as_millis() as u64,
                ces: CeSet::new(),
                note: Some(e.to_string()),
                problem: None,
            });
            ctx.failures.push(e.into());
            return;
        }
    };
    let r = infer_loop(ctx, &hp, solver, opts, PromptKind::Initial);
    let status = match &r.invariant {
        Some((inv, verdict, origin)) => {
            ctx.pre_cond = ctx.pre_cond.and(&inv.and(&hp.guard.not()));
            ctx.summaries.insert(
                Region::Loop(id),
                Summary { region: Region::Loop(id), predicate: inv.clone(), verdict: Some(verdict.clone()), origin: *origin },
            );
            LoopStatus::Solved
        }
        None => {
            ctx.failures.push(SummarizeError::SummarizationFailed(Region::Loop(id)));
            LoopStatus::Exhausted
        }
    };
    ctx.records.insert(id, LoopRecord {
        status,
        rounds: r.rounds,
        refinement_rounds: 0,
        queries: r.queries,
        time_ms: start.elapsed().as_millis() as u64,
        ces: r.ces,
        note: r.note,
        problem: Some(hp),
    });
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    pub loop_id: usize,
    pub invariant: Option<String>,
    /// `Solved`/`Exhausted`/`Error` for inference, a verdict name for
    /// verification.
    pub status: String,
    pub rounds: usize,
    pub refinement_rounds: usize,
    pub smt_queries: u64,
    pub time_ms: u64,
    pub counterexamples: Vec<Counterexample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Totals {
    pub loops: usize,
    pub solved: usize,
    pub smt_queries: u64,
    pub time_ms: u64,
    /// Verdict of the assertions and post on paths that reach no loop.
    pub loop_free_obligations: String,
    /// `Solved`, `Failed` or `Inconclusive`.
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub program: String,
    pub loops: Vec<LoopReport>,
    pub mode: String,
    pub solver: String,
    pub totals: Totals,
}

impl Report {
    pub fn solved(&self) -> bool {
        self.totals.verdict == "Solved"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Zeroes every wall-clock field, leaving a report that is a pure
    /// function of the program, the options and the solver's answers.
    pub fn strip_timing(&mut self) {
        self.totals.time_ms = 0;
        self.loops.iter_mut().for_each(|l| l.time_ms = 0);
    }
}

fn obligations_verdict(p: &Program, solver: &Solver) -> Verdict {
    let vars = p.decls.iter().cloned().collect();
    check_program_obligations(solver, &Predicate::from_expr(p.precondition()), &program_obligations(p), &vars)
}

fn overall(statuses: impl Iterator<Item = bool>, obligations: &VerdictStatus, inconclusive: bool) -> String {
    let all = statuses.fold(true, |acc, ok| acc && ok);
    match obligations {
        VerdictStatus::Valid if all => "Solved".into(),
        VerdictStatus::Inconclusive(_) => "Inconclusive".into(),
        _ if inconclusive => "Inconclusive".into(),
        _ => "Failed".into(),
    }
}

/// Re-check every recorded loop summary against the problem built from all
/// final summaries, refine failing loops once, and repeat until stable.
pub fn final_check(p: &Program, g: &Cfg, mut ctx: Context, solver: &Solver, opts: &PipelineOptions<'_>) -> (Report, Context) {
    let ids = p.loop_ids();
    let mut refined = BTreeSet::new();
    for _ in 0..=ids.len() {
        let mut changed = false;
        for &id in &ids {
            let summaries = ctx.loop_summaries(p);
            let hp = match build_problem(p, g, id, &summaries) {
                Ok(hp) => hp,
                Err(e) => {
                    if let Some(r) = ctx.records.get_mut(&id) {
                        r.status = LoopStatus::Error;
                        r.note = Some(e.to_string());
                    }
                    continue;
                }
            };
            let rec_ok = ctx.records.get(&id).map(|r| r.status == LoopStatus::Solved).unwrap_or(false);
            let current = ctx.summaries.get(&Region::Loop(id)).map(|s| s.predicate.clone());
            if let (true, Some(inv)) = (rec_ok, &current) {
                let v = check_invariant(solver, &hp, inv);
                if let Some(r) = ctx.records.get_mut(&id) {
                    r.queries += v.queries;
                }
                if v.is_valid() {
                    continue;
                }
            }
            let unchanged = ctx.records.get(&id).and_then(|r| r.problem.as_ref()) == Some(&hp);
            if opts.mode == GenMode::Combinor && unchanged {
                continue;
            }
            if !refined.insert(id) {
                // One refinement per loop; a second failure demotes the loop.
                if ctx.records.get(&id).map(|r| r.status == LoopStatus::Solved).unwrap_or(false) {
                    ctx.summaries.remove(&Region::Loop(id));
                    if let Some(r) = ctx.records.get_mut(&id) {
                        r.status = LoopStatus::Exhausted;
                    }
                    changed = true;
                }
                continue;
            }
            let start = Instant::now();
            let kind = if opts.mode == GenMode::Combinor { PromptKind::Initial } else { PromptKind::Refine };
            let r = infer_loop(&ctx, &hp, solver, opts, kind);
            let rec = ctx.records.entry(id).or_insert_with(|| LoopRecord {
                status: LoopStatus::Exhausted,
                rounds: 0,
                refinement_rounds: 0,
                queries: 0,
                time_ms: 0,
                ces: CeSet::new(),
                note: None,
                problem: None,
            });
            rec.problem = Some(hp);
            rec.refinement_rounds += r.rounds;
            rec.queries += r.queries;
            rec.time_ms += start.elapsed().as_millis() as u64;
            for ce in r.ces.entries() {
                rec.ces.insert(ce.clone());
            }
            if r.note.is_some() {
                rec.note = r.note;
            }
            match r.invariant {
                Some((inv, verdict, origin)) => {
                    rec.status = LoopStatus::Solved;
                    ctx.summaries.insert(Region::Loop(id), Summary { region: Region::Loop(id), predicate: inv, verdict: Some(verdict), origin });
                }
                None => {
                    rec.status = LoopStatus::Exhausted;
                    ctx.summaries.remove(&Region::Loop(id));
                }
            }
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let obligations = obligations_verdict(p, solver);
    let loops: Vec<LoopReport> = ids
        .iter()
        .map(|id| {
            let rec = ctx.records.get(id);
            let solved = rec.map(|r| r.status == LoopStatus::Solved).unwrap_or(false);
            LoopReport {
                loop_id: id.0,
                invariant: if solved { ctx.summaries.get(&Region::Loop(*id)).map(|s| s.predicate.to_string()) } else { None },
                status: format!("{:?}", rec.map(|r| r.status).unwrap_or(LoopStatus::Exhausted)),
                rounds: rec.map(|r| r.rounds).unwrap_or(0),
                refinement_rounds: rec.map(|r| r.refinement_rounds).unwrap_or(0),
                smt_queries: rec.map(|r| r.queries).unwrap_or(0),
                time_ms: rec.map(|r| r.time_ms).unwrap_or(0),
                counterexamples: rec.map(|r| r.ces.entries().to_vec()).unwrap_or_default(),
                note: rec.and_then(|r| r.note.clone()),
            }
        })
        .collect();
    let verdict = overall(loops.iter().map(|l| l.status == "Solved"), &obligations.status, false);
    let report = Report {
        program: p.name.clone(),
        totals: Totals {
            loops: loops.len(),
            solved: loops.iter().filter(|l| l.status == "Solved").count(),
            smt_queries: loops.iter().map(|l| l.smt_queries).sum::<u64>() + obligations.queries,
            time_ms: loops.iter().map(|l| l.time_ms).sum(),
            loop_free_obligations: obligations.status.name().into(),
            verdict,
        },
        loops,
        mode: opts.mode.to_string(),
        solver: solver.config.name(),
    };
    (report, ctx)
}

/// The whole inference pipeline for one program.
pub fn infer_program(p: &Program, solver: &Solver, opts: &PipelineOptions<'_>) -> (Report, Context) {
    let g = build_cfg(p);
    let ps = order_by_priority(find_all_paths(&g));
    let ctx = hierarch_summarize(p, &g, &ps, Context::new(p), solver, opts);
    final_check(p, &g, ctx, solver, opts)
}

/// Check user-supplied invariants, one per loop. Every loop sees the other
/// loops' supplied invariants as summaries.
pub fn verify_program(p: &Program, invariants: &BTreeMap<LoopId, Predicate>, solver: &Solver) -> Result<Report, SummarizeError> {
    let g = build_cfg(p);
    let ids = p.loop_ids();
    let summaries: Summaries = invariants.clone();
    let mut loops = Vec::new();
    let mut inconclusive = false;
    for id in &ids {
        let start = Instant::now();
        let inv = invariants.get(id).ok_or(HoareError::MissingSummary(*id))?;
        let hp = build_problem(p, &g, *id, &summaries)?;
        let v = check_invariant(solver, &hp, inv);
        inconclusive |= matches!(v.status, VerdictStatus::Inconclusive(_));
        loops.push(LoopReport {
            loop_id: id.0,
            invariant: Some(inv.to_string()),
            status: v.status.name().into(),
            rounds: 1,
            refinement_rounds: 0,
            smt_queries: v.queries,
            time_ms: start.elapsed().as_millis() as u64,
            counterexamples: v.counterexample.into_iter().collect(),
            note: match v.status {
                VerdictStatus::Inconclusive(r) => Some(r),
                _ => None,
            },
        });
    }
    let obligations = obligations_verdict(p, solver);
    let verdict = overall(loops.iter().map(|l| l.status == "Valid"), &obligations.status, inconclusive);
    Ok(Report {
        program: p.name.clone(),
        totals: Totals {
            loops: loops.len(),
            solved: loops.iter().filter(|l| l.status == "Valid").count(),
            smt_queries: loops.iter().map(|l| l.smt_queries).sum::<u64>() + obligations.queries,
            time_ms: loops.iter().map(|l| l.time_ms).sum(),
            loop_free_obligations: obligations.status.name().into(),
            verdict,
        },
        loops,
        mode: "verify".into(),
        solver: solver.config.name(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_formula, parse_program};
    use crate::interp::{eval_bool, State};
    use crate::smt::SolverConfig;

    fn solver() -> Solver {
        Solver::new(SolverConfig::discover(None, 10_000).expect("these tests need z3 or cvc5 on PATH"))
    }

    fn segments(src: &str) -> (Program, Cfg, PathSet) {
        let p = parse_program(src).unwrap();
        let g = build_cfg(&p);
        let ps = order_by_priority(find_all_paths(&g));
        (p, g, ps)
    }

    #[test]
    fn straight_line_pre_cond_is_sp() {
        let (p, g, ps) = segments("//@ pre: x == 0\nint x, y; x = x + 1; y = x;");
        let ctx = hierarch_summarize(&p, &g, &ps, Context::new(&p), &solver(), &PipelineOptions::combinor(GeneratorBudget::default()));
        let want = strongest_post(&Predicate::new(parse_formula("x == 0").unwrap()).unwrap(), &p.body).unwrap();
        assert_eq!(ctx.pre_cond, want);
        assert!(ctx.loop_stack.is_empty() && ctx.branch_stack.is_empty());
    }

    #[test]
    fn branch_join_gains_disjunction() {
        let (p, g, ps) = segments("int c, y; if (c > 0) { y = 1; } else { y = -1; }");
        let ctx = hierarch_summarize(&p, &g, &ps, Context::new(&p), &solver(), &PipelineOptions::combinor(GeneratorBudget::default()));
        // Every c in range: the join admits exactly y == 1 / y == -1 per arm.
        for c in -3..=3 {
            for y in -2..=2 {
                let s: State = [("c".to_string(), c), ("y".to_string(), y)].into();
                let holds = eval_bool(ctx.pre_cond.expr(), &s).unwrap();
                assert_eq!(holds, (c > 0 && y == 1) || (c <= 0 && y == -1), "c={c} y={y}");
            }
        }
        assert_eq!(ctx.summaries.len(), 2);
    }

    #[test]
    fn count_up_report() {
        let p = parse_program("//@ pre: n >= 0\n//@ post: x == n\nint x, n; x = 0; while (x < n) { x = x + 1; }").unwrap();
        let (report, ctx) = infer_program(&p, &solver(), &PipelineOptions::combinor(GeneratorBudget::default()));
        assert!(report.solved(), "{}", report.to_json());
        assert_eq!(report.loops[0].refinement_rounds, 0);
        assert!(ctx.summaries[&Region::Loop(LoopId(0))].verdict.as_ref().unwrap().is_valid());
    }

    #[test]
    fn loop_free_program() {
        let p = parse_program("//@ pre: y > 0\nint x, y; x = y; assert(x > 0);").unwrap();
        let (report, _) = infer_program(&p, &solver(), &PipelineOptions::combinor(GeneratorBudget::default()));
        assert!(report.loops.is_empty());
        assert_eq!(report.totals.verdict, "Solved");
    }

    #[test]
    fn verify_reports_each_loop() {
        let p = parse_program("//@ pre: n >= 0\n//@ post: x == n\nint x, n; x = 0; while (x < n) { x = x + 1; }").unwrap();
        let inv = |s: &str| BTreeMap::from([(LoopId(0), Predicate::new(parse_formula(s).unwrap()).unwrap())]);
        let s = solver();
        assert_eq!(verify_program(&p, &inv("x <= n"), &s).unwrap().totals.verdict, "Solved");
        let bad = verify_program(&p, &inv("x == 0"), &s).unwrap();
        assert_eq!(bad.loops[0].status, "PreserveFail");
        assert!(matches!(verify_program(&p, &BTreeMap::new(), &s), Err(SummarizeError::Hoare(HoareError::MissingSummary(_)))));
    }
}
