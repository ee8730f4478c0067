//! External SMT solver driver: one process per query over stdin/stdout.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::logic::SmtScript;

pub type Model = BTreeMap<String, i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Z3,
    Cvc5,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub args: Vec<String>,
    /// Always positive.
    pub timeout_ms: u64,
    pub kind: SolverKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("no SMT solver found (pass --solver, set PATHINV_SOLVER, or put z3/cvc5 on PATH)")]
    NotFound,
    #[error("timeout must be positive")]
    BadTimeout,
    #[error("cannot parse model near `{0}`")]
    ModelParse(String),
}

impl SolverConfig {
    /// Configure a solver binary, inferring its dialect from the file name.
    pub fn new(executable: impl Into<PathBuf>, timeout_ms: u64) -> Result<SolverConfig, SmtError> {
        if timeout_ms == 0 {
            return Err(SmtError::BadTimeout);
        }
        let executable = executable.into();
        let stem = executable.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_ascii_lowercase();
        let (kind, args) = if stem.starts_with("z3") {
            (SolverKind::Z3, vec!["-in".to_string()])
        } else if stem.starts_with("cvc5") {
            (SolverKind::Cvc5, vec!["--lang=smt2".to_string()])
        } else {
            (SolverKind::Generic, Vec::new())
        };
        Ok(SolverConfig { executable, args, timeout_ms, kind })
    }

    /// Resolution order: explicit path, `PATHINV_SOLVER`, then `z3` or `cvc5`
    /// on `PATH`.
    pub fn discover(explicit: Option<&str>, timeout_ms: u64) -> Result<SolverConfig, SmtError> {
        if let Some(p) = explicit {
            return SolverConfig::new(resolve(p).ok_or(SmtError::NotFound)?, timeout_ms);
        }
        if let Ok(p) = std::env::var("PATHINV_SOLVER") {
            if !p.is_empty() {
                return SolverConfig::new(resolve(&p).ok_or(SmtError::NotFound)?, timeout_ms);
            }
        }
        for name in ["z3", "cvc5"] {
            if let Some(p) = which(name) {
                return SolverConfig::new(p, timeout_ms);
            }
        }
        Err(SmtError::NotFound)
    }

    /// Short display name: the executable's file name.
    pub fn name(&self) -> String {
        self.executable.file_name().and_then(|s| s.to_str()).unwrap_or("solver").to_string()
    }
}

fn resolve(p: &str) -> Option<PathBuf> {
    let path = Path::new(p);
    if path.components().count() > 1 {
        path.is_file().then(|| path.to_path_buf())
    } else {
        which(p).or_else(|| path.is_file().then(|| path.to_path_buf()))
    }
}

fn which(name: &str) -> Option<PathBuf> {
    let paths = std::env::var_os("PATH")?;
    std::env::split_paths(&paths).map(|d| d.join(name)).find(|p| p.is_file())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    SolverError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResult {
    pub status: SolverStatus,
    /// Present iff `status == Sat` and the script asked for a model; assigns
    /// every declared constant.
    pub model: Option<Model>,
}

impl SolverResult {
    fn status(status: SolverStatus) -> SolverResult {
        SolverResult { status, model: None }
    }
}

/// Run one query in a fresh solver process. The process is always reaped,
/// including on timeout.
pub fn check(cfg: &SolverConfig, script: &SmtScript) -> SolverResult {
    let text = script.render();
    let mut child = match Command::new(&cfg.executable)
        .args(&cfg.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return SolverResult::status(SolverStatus::SolverError(format!("cannot start {}: {e}", cfg.executable.display()))),
    };

    let mut stdin = child.stdin.take().expect("stdin is piped");
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(text.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let mut stderr = child.stderr.take().expect("stderr is piped");
    let (tx, rx) = mpsc::channel();
    let reader = thread::spawn(move || {
        let mut out = String::new();
        let _ = stdout.read_to_string(&mut out);
        let _ = tx.send(out);
    });
    let err_reader = thread::spawn(move || {
        let mut err = String::new();
        let _ = stderr.read_to_string(&mut err);
        err
    });

    let output = rx.recv_timeout(Duration::from_millis(cfg.timeout_ms));
    if output.is_err() {
        let _ = child.kill();
    }
    let exit = child.wait();
    let _ = writer.join();
    let _ = reader.join();
    let stderr_text = err_reader.join().unwrap_or_default();

    match output {
        Err(_) => SolverResult::status(SolverStatus::Timeout),
        Ok(out) => {
            let result = interpret_output(&out, script);
            match (&result.status, exit) {
                (SolverStatus::SolverError(_), Ok(code)) if !code.success() && !stderr_text.trim().is_empty() => {
                    SolverResult::status(SolverStatus::SolverError(stderr_text.trim().to_string()))
                }
                _ => result,
            }
        }
    }
}

/// Interpret raw solver output for `script`: the first status token decides;
/// a model, if requested, is completed with 0 for constants the solver left
/// unassigned.
pub fn interpret_output(out: &str, script: &SmtScript) -> SolverResult {
    let trimmed = out.trim_start();
    let first = trimmed.split_whitespace().next().unwrap_or("");
    let rest = &trimmed[first.len()..];
    match first {
        "unsat" => SolverResult::status(SolverStatus::Unsat),
        "unknown" => SolverResult::status(SolverStatus::Unknown),
        "timeout" => SolverResult::status(SolverStatus::Timeout),
        "sat" if !script.get_model => SolverResult::status(SolverStatus::Sat),
        "sat" => match parse_model(rest) {
            Ok(mut model) => {
                for d in &script.declarations {
                    model.entry(d.clone()).or_insert(0);
                }
                model.retain(|k, _| script.declarations.contains(k));
                SolverResult { status: SolverStatus::Sat, model: Some(model) }
            }
            Err(e) => SolverResult::status(SolverStatus::SolverError(e.to_string())),
        },
        _ => {
            let line = trimmed.lines().next().unwrap_or("").trim();
            let msg = if line.is_empty() { "no output".to_string() } else { line.to_string() };
            SolverResult::status(SolverStatus::SolverError(msg))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn parse_sexprs(text: &str) -> Result<Vec<Sx>, SmtError> {
    let chars: Vec<char> = text.chars().collect();
    let mut stack: Vec<Vec<Sx>> = vec![Vec::new()];
    let mut i = 0;
    let fragment = |i: usize| chars[i.saturating_sub(10)..(i + 20).min(chars.len())].iter().collect::<String>();
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                stack.push(Vec::new());
                i += 1;
            }
            ')' => {
                if stack.len() < 2 {
                    return Err(SmtError::ModelParse(fragment(i)));
                }
                let list = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Sx::List(list));
                i += 1;
            }
            '|' | '"' => {
                let end = chars[i + 1..].iter().position(|&d| d == c).ok_or_else(|| SmtError::ModelParse(fragment(i)))?;
                let body: String = chars[i + 1..i + 1 + end].iter().collect();
                stack.last_mut().unwrap().push(Sx::Atom(body));
                i += end + 2;
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '(' | ')' | '|' | '"' | ';') {
                    i += 1;
                }
                stack.last_mut().unwrap().push(Sx::Atom(chars[start..i].iter().collect()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::ModelParse(fragment(chars.len())));
    }
    Ok(stack.pop().unwrap())
}

fn int_value(v: &Sx) -> Option<i64> {
    match v {
        Sx::Atom(a) => a.parse().ok(),
        Sx::List(items) => match items.as_slice() {
            [Sx::Atom(minus), inner] if minus == "-" => int_value(inner)?.checked_neg(),
            _ => None,
        },
    }
}

fn render(sx: &Sx) -> String {
    match sx {
        Sx::Atom(a) => a.clone(),
        Sx::List(items) => format!("({})", items.iter().map(render).collect::<Vec<_>>().join(" ")),
    }
}

fn collect_defs(sx: &Sx, out: &mut Model) -> Result<(), SmtError> {
    let Sx::List(items) = sx else { return Ok(()) };
    if let Some(Sx::Atom(head)) = items.first() {
        if head == "define-fun" {
            return match items.as_slice() {
                [_, Sx::Atom(name), Sx::List(params), Sx::Atom(sort), value] if params.is_empty() => {
                    if sort != "Int" {
                        return Err(SmtError::ModelParse(render(sx)));
                    }
                    let v = int_value(value).ok_or_else(|| SmtError::ModelParse(render(sx)))?;
                    out.insert(name.clone(), v);
                    Ok(())
                }
                _ => Err(SmtError::ModelParse(render(sx))),
            };
        }
    }
    for item in items {
        collect_defs(item, out)?;
    }
    Ok(())
}

/// Extract integer constants from `get-model` output (z3 or cvc5 layout).
pub fn parse_model(text: &str) -> Result<Model, SmtError> {
    let mut out = Model::new();
    for sx in parse_sexprs(text)? {
        collect_defs(&sx, &mut out)?;
    }
    Ok(out)
}

/// A configured solver that counts the queries it runs.
#[derive(Debug)]
pub struct Solver {
    pub config: SolverConfig,
    queries: AtomicU64,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Solver {
        Solver { config, queries: AtomicU64::new(0) }
    }

    pub fn check(&self, script: &SmtScript) -> SolverResult {
        self.queries.fetch_add(1, Ordering::Relaxed);
        check(&self.config, script)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

impl Clone for Solver {
    fn clone(&self) -> Solver {
        Solver::new(self.config.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_formula;
    use crate::logic::{to_smt, Predicate};

    fn script(s: &str) -> SmtScript {
        to_smt(&[Predicate::new(parse_formula(s).unwrap()).unwrap()])
    }

    #[test]
    fn canonical_model() {
        assert_eq!(parse_model("(model (define-fun x () Int 4))").unwrap(), Model::from([("x".into(), 4)]));
    }

    #[test]
    fn negative_literal() {
        assert_eq!(parse_model("(define-fun n () Int (- 2))").unwrap(), Model::from([("n".into(), -2)]));
    }

    #[test]
    fn z3_layout() {
        let text = "(\n  (define-fun x () Int\n    (- 4))\n  (define-fun |n| () Int\n    0)\n)\n";
        assert_eq!(parse_model(text).unwrap(), Model::from([("x".into(), -4), ("n".into(), 0)]));
    }

    #[test]
    fn non_int_sort_is_rejected() {
        assert!(matches!(parse_model("(model (define-fun b () Bool true))"), Err(SmtError::ModelParse(_))));
    }

    #[test]
    fn status_interpretation() {
        let s = script("x > 0 && y >= x");
        assert_eq!(interpret_output("unsat\n(error \"model is not available\")", &s).status, SolverStatus::Unsat);
        assert_eq!(interpret_output("unknown\n", &s).status, SolverStatus::Unknown);
        let r = interpret_output("sat\n((define-fun x () Int 1))", &s);
        assert_eq!(r.model, Some(Model::from([("x".into(), 1), ("y".into(), 0)])));
        assert!(matches!(interpret_output("", &s).status, SolverStatus::SolverError(_)));
        assert_eq!(interpret_output("sat\n((define-fun x () Int 1))", &s), r);
    }

    #[test]
    fn config_validation() {
        assert_eq!(SolverConfig::new("z3", 0), Err(SmtError::BadTimeout));
        let c = SolverConfig::new("/usr/bin/cvc5", 10).unwrap();
        assert_eq!((c.kind, c.args.clone()), (SolverKind::Cvc5, vec!["--lang=smt2".to_string()]));
        assert_eq!(SolverConfig::discover(Some("/nonexistent/solver"), 10), Err(SmtError::NotFound));
    }
}
