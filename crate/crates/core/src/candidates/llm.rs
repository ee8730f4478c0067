//! LLM clause source: prompt rendering, providers, and response parsing.
//!
//! The mock provider reads a JSON object mapping the SHA-256 hex digest of a
//! rendered prompt to the response text; the key `"*"` answers any prompt
//! without an exact entry.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Duration;

use log::warn;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::CeSet;
use crate::frontend::{parse_expr, BinOp, Expr, LoopId};
use crate::hoare::CeKind;
use crate::interp::State;
use crate::logic::{linearize, Clause, Normalized};

const SYSTEM: &str = include_str!("../../../../prompts/system.txt");
const INITIAL: &str = include_str!("../../../../prompts/initial.txt");
const INIT_FAIL: &str = include_str!("../../../../prompts/init_fail.txt");
const PRESERVE_FAIL: &str = include_str!("../../../../prompts/preserve_fail.txt");
const TERM_FAIL: &str = include_str!("../../../../prompts/term_fail.txt");
const REFINE: &str = include_str!("../../../../prompts/refine.txt");

/// Counterexamples rendered into a prompt, most recent last.
const PROMPT_CES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM response contained no usable clause: {0}")]
    Format(String),
    #[error("LLM configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Initial,
    InitFail,
    PreserveFail,
    TermFail,
    Refine,
}

impl PromptKind {
    fn template(self) -> &'static str {
        match self {
            PromptKind::Initial => INITIAL,
            PromptKind::InitFail => INIT_FAIL,
            PromptKind::PreserveFail => PRESERVE_FAIL,
            PromptKind::TermFail => TERM_FAIL,
            PromptKind::Refine => REFINE,
        }
    }

    /// The follow-up prompt after a failure of `kind`.
    pub fn after(kind: CeKind) -> PromptKind {
        match kind {
            CeKind::Init => PromptKind::InitFail,
            CeKind::Preserve => PromptKind::PreserveFail,
            CeKind::Term => PromptKind::TermFail,
        }
    }
}

/// Everything a prompt may mention about the loop being inferred.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptContext {
    pub program: String,
    pub loop_id: LoopId,
    pub pre: String,
    pub guard: String,
    pub post: String,
    /// One `loopK: formula` line per known summary, or `none`.
    pub summaries: String,
}

fn valuation(s: &State) -> String {
    s.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

/// The most recent counterexamples as variable valuations, one per line.
pub fn render_ceset(ces: &CeSet) -> String {
    let entries = ces.entries();
    if entries.is_empty() {
        return "none".into();
    }
    let lines: Vec<String> = entries[entries.len().saturating_sub(PROMPT_CES)..]
        .iter()
        .map(|ce| match (&ce.kind, &ce.post_state) {
            (CeKind::Preserve, Some(post)) => format!("- before: {}; after: {}", valuation(&ce.state), valuation(post)),
            (CeKind::Init, _) => format!("- on entry: {}", valuation(&ce.state)),
            _ => format!("- at loop head: {}", valuation(&ce.state)),
        })
        .collect();
    lines.join("\n")
}

pub fn render_prompt(kind: PromptKind, ctx: &PromptContext, ces: &CeSet) -> String {
    kind.template()
        .replace("{program}", ctx.program.trim_end())
        .replace("{loop}", &ctx.loop_id.to_string())
        .replace("{pre}", &ctx.pre)
        .replace("{guard}", &ctx.guard)
        .replace("{post}", &ctx.post)
        .replace("{summaries}", &ctx.summaries)
        .replace("{ceset}", &render_ceset(ces))
}

fn fenced_block(text: &str) -> &str {
    let Some(start) = text.find("```") else { return text };
    let body = &text[start + 3..];
    // Skip an info string such as ```c.
    let body = body.find('\n').map(|i| &body[i + 1..]).unwrap_or("");
    match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    }
}

/// Clauses from the first fenced block of `text` (the whole text if there is
/// none). A line may be a conjunction, which is split. Lines that are
/// disjunctive, nonlinear, mention unknown variables, or fail to parse are
/// dropped and returned as the second component.
pub fn parse_clauses(text: &str, vars: &BTreeSet<String>) -> (Vec<Clause>, Vec<String>) {
    let mut out = Vec::new();
    let mut dropped = Vec::new();
    for raw in fenced_block(text).lines() {
        let line = raw.trim().trim_start_matches("- ").trim_end_matches(';').trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        match clauses_of_line(line, vars) {
            Ok(cs) => out.extend(cs),
            Err(why) => {
                warn!("dropping LLM line `{line}`: {why}");
                dropped.push(line.to_string());
            }
        }
    }
    (out, dropped)
}

fn clauses_of_line(line: &str, vars: &BTreeSet<String>) -> Result<Vec<Clause>, String> {
    let e = parse_expr(line).map_err(|e| e.to_string())?;
    let unknown: Vec<String> = e.vars().difference(vars).cloned().collect();
    if !unknown.is_empty() {
        return Err(format!("unknown variables {unknown:?}"));
    }
    let mut out = Vec::new();
    for atom in e.conjuncts() {
        if matches!(atom, Expr::Binary(BinOp::Or, ..)) {
            return Err("disjunction".into());
        }
        if let Expr::Binary(op, l, r) = atom {
            if op.is_comparison() {
                linearize(l).and_then(|_| linearize(r)).map_err(|e| e.to_string())?;
            }
        }
        match Clause::from_atom(atom).map_err(|e| e.to_string())? {
            Normalized::Clause(c) => out.push(c),
            Normalized::Const(_) => return Err("constant".into()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provider {
    Mock(PathBuf),
    /// OpenAI-compatible chat-completions endpoint.
    Http { endpoint: String, model: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub provider: Provider,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
}

impl LlmConfig {
    pub fn mock(path: impl Into<PathBuf>) -> LlmConfig {
        LlmConfig { provider: Provider::Mock(path.into()), temperature: 0.0, max_tokens: 512, timeout_ms: 60_000 }
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> LlmConfig {
        LlmConfig {
            provider: Provider::Http { endpoint: endpoint.into(), model: model.into() },
            temperature: 0.0,
            max_tokens: 512,
            timeout_ms: 60_000,
        }
    }
}

enum Backend {
    Mock(BTreeMap<String, String>),
    Http { endpoint: String, model: String, key: Option<String>, client: reqwest::blocking::Client },
}

pub struct LlmClient {
    config: LlmConfig,
    backend: Backend,
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Result<LlmClient, LlmError> {
        let backend = match &config.provider {
            Provider::Mock(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
                let map = serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
                Backend::Mock(map)
            }
            Provider::Http { endpoint, model } => {
                let client = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_millis(config.timeout_ms))
                    .build()
                    .map_err(|e| LlmError::Config(e.to_string()))?;
                let key = std::env::var("PATHINV_LLM_KEY").ok();
                Backend::Http { endpoint: endpoint.clone(), model: model.clone(), key, client }
            }
        };
        Ok(LlmClient { config, backend })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// One chat-completion request.
    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        match &self.backend {
            Backend::Mock(map) => {
                let hash = prompt_hash(prompt);
                map.get(&hash)
                    .or_else(|| map.get("*"))
                    .cloned()
                    .ok_or_else(|| LlmError::Transport(format!("mock has no response for prompt {hash}")))
            }
            Backend::Http { endpoint, model, key, client } => {
                let body = json!({
                    "model": model,
                    "temperature": self.config.temperature,
                    "max_tokens": self.config.max_tokens,
                    "messages": [
                        {"role": "system", "content": SYSTEM},
                        {"role": "user", "content": prompt},
                    ],
                });
                let mut req = client.post(endpoint).json(&body);
                if let Some(k) = key {
                    req = req.bearer_auth(k);
                }
                let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
                let status = resp.status();
                if !status.is_success() {
                    return Err(LlmError::Transport(format!("HTTP {status}")));
                }
                let v: Value = resp.json().map_err(|e| LlmError::Transport(e.to_string()))?;
                v.pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| LlmError::Format("response has no choices[0].message.content".into()))
            }
        }
    }

    /// Render, send, and parse; at most `max_clauses` clauses are returned.
    pub fn generate(&self, kind: PromptKind, ctx: &PromptContext, ces: &CeSet, vars: &BTreeSet<String>, max_clauses: usize) -> Result<Vec<Clause>, LlmError> {
        let prompt = render_prompt(kind, ctx, ces);
        let text = self.complete(&prompt)?;
        let (mut clauses, dropped) = parse_clauses(&text, vars);
        if clauses.is_empty() {
            return Err(LlmError::Format(format!("{} line(s) dropped", dropped.len())));
        }
        clauses.truncate(max_clauses);
        Ok(clauses)
    }
}
