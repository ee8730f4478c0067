//! Candidate invariant generation: a template clause store, the Combinor that
//! enumerates boolean combinations of stored clauses, an LLM clause source,
//! and the generate/check/refine loop that ties them to the solver.

mod combine;
mod infer;
mod llm;
mod store;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::frontend::Expr;
use crate::hoare::{CeKind, Counterexample};
use crate::interp::{eval_bool, State};
use crate::logic::{Clause, Predicate};

pub use combine::{combine, Combinor, Phase, Shape};
pub use infer::{infer_invariant, InferOptions, InferResult, Outcome};
pub use llm::{parse_clauses, prompt_hash, render_ceset, render_prompt, LlmClient, LlmConfig, LlmError, PromptContext, PromptKind, Provider};
pub use store::{seed_clauses, template_clauses};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClauseSource {
    Template,
    Llm,
    /// Harvested from the problem's pre, guard or post.
    Seeded,
}

/// Ordered, deduplicated clauses with their provenance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExprStore {
    clauses: Vec<Clause>,
    sources: Vec<ClauseSource>,
    seen: BTreeSet<Clause>,
}

impl ExprStore {
    pub fn new() -> ExprStore {
        ExprStore::default()
    }

    /// Appends `c` unless an identical normalized clause is present.
    pub fn insert(&mut self, c: Clause, source: ClauseSource) -> bool {
        if !self.seen.insert(c.clone()) {
            return false;
        }
        self.clauses.push(c);
        self.sources.push(source);
        true
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn source(&self, i: usize) -> ClauseSource {
        self.sources[i]
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn contains(&self, c: &Clause) -> bool {
        self.seen.contains(c)
    }

    /// A new store holding `first`'s clauses followed by the rest of `self`.
    pub fn prepended(&self, first: &ExprStore) -> ExprStore {
        let mut out = first.clone();
        for (c, s) in self.clauses.iter().zip(&self.sources) {
            out.insert(c.clone(), *s);
        }
        out
    }
}

/// Counterexamples collected for one loop, unique by `(kind, state)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CeSet {
    entries: Vec<Counterexample>,
    keys: BTreeSet<(CeKind, State)>,
}

impl CeSet {
    pub fn new() -> CeSet {
        CeSet::default()
    }

    pub fn insert(&mut self, ce: Counterexample) -> bool {
        if !self.keys.insert((ce.kind, ce.state.clone())) {
            return false;
        }
        self.entries.push(ce);
        true
    }

    pub fn entries(&self) -> &[Counterexample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Serialize for CeSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateOrigin {
    Combinor,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub formula: Predicate,
    pub clauses_used: Vec<Clause>,
    pub generation: usize,
    pub origin: CandidateOrigin,
}

impl Candidate {
    pub fn conjunction(clauses: Vec<Clause>, generation: usize, origin: CandidateOrigin) -> Candidate {
        let formula = Predicate::from_expr(Expr::conjoin(clauses.iter().map(Clause::to_expr)));
        Candidate { formula, clauses_used: clauses, generation, origin }
    }
}

impl Serialize for Candidate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.formula)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GeneratorBudget {
    pub max_clauses_per_round: usize,
    pub max_combination_size: usize,
    pub max_rounds: usize,
    pub per_candidate_timeout_ms: u64,
    pub total_timeout_ms: u64,
}

impl Default for GeneratorBudget {
    fn default() -> GeneratorBudget {
        GeneratorBudget {
            max_clauses_per_round: 64,
            max_combination_size: 3,
            max_rounds: 300,
            per_candidate_timeout_ms: 10_000,
            total_timeout_ms: 60_000,
        }
    }
}

impl GeneratorBudget {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("max_clauses_per_round", self.max_clauses_per_round as u64),
            ("max_combination_size", self.max_combination_size as u64),
            ("max_rounds", self.max_rounds as u64),
            ("per_candidate_timeout_ms", self.per_candidate_timeout_ms),
            ("total_timeout_ms", self.total_timeout_ms),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(format!("budget field {name} must be positive")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    Combinor,
    Llm,
    Hybrid,
}

impl fmt::Display for GenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenMode::Combinor => "combinor",
            GenMode::Llm => "llm",
            GenMode::Hybrid => "hybrid",
        })
    }
}

impl FromStr for GenMode {
    type Err = String;
    fn from_str(s: &str) -> Result<GenMode, String> {
        match s {
            "combinor" => Ok(GenMode::Combinor),
            "llm" => Ok(GenMode::Llm),
            "hybrid" => Ok(GenMode::Hybrid),
            other => Err(format!("unknown mode `{other}` (expected combinor, llm or hybrid)")),
        }
    }
}

/// Keep/drop decision by concrete evaluation against collected
/// counterexamples; `true` means keep. A term counterexample has already been
/// replayed to a goal violation, so any candidate that admits its state fails.
pub fn filter_by_ces(cand: &Candidate, ces: &CeSet) -> bool {
    let holds = |s: &State| eval_bool(cand.formula.expr(), s).ok();
    !ces.entries().iter().any(|ce| match ce.kind {
        CeKind::Init => holds(&ce.state) == Some(false),
        CeKind::Preserve => {
            holds(&ce.state) == Some(true) && ce.post_state.as_ref().and_then(|p| holds(p)) == Some(false)
        }
        CeKind::Term => holds(&ce.state) == Some(true),
    })
}
