//! `pathinv bench`: run inference over a directory of programs and tabulate.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use pathinv_core::candidates::{GenMode, LlmClient};
use pathinv_core::summarize::Report;

use crate::{load, stem, Failure, GenArgs, Settings, EXIT_CONFIG, EXIT_OK};

pub struct BenchOptions {
    pub compare: Option<String>,
    pub jobs: usize,
    pub out: PathBuf,
    pub program_timeout_ms: u64,
    pub seed: u64,
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchEntry {
    pub program: String,
    pub mode: String,
    /// `Solved`, `Failed`, `Inconclusive`, `ParseError` or `Timeout`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
}

impl BenchEntry {
    fn queries(&self) -> u64 {
        self.report.as_ref().map_or(0, |r| r.totals.smt_queries)
    }

    fn time_ms(&self) -> u64 {
        self.report.as_ref().map_or(0, |r| r.totals.time_ms)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub mode: String,
    pub total: usize,
    pub solved: usize,
    pub mean_time_ms: f64,
    pub mean_smt_queries: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub program: String,
    /// Status per mode, in the order of `BenchResult::modes`.
    pub statuses: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub modes: Vec<String>,
    pub seed: u64,
    pub entries: Vec<BenchEntry>,
    pub aggregate: Vec<Aggregate>,
    pub comparison: Vec<ComparisonRow>,
}

fn programs(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let rd = std::fs::read_dir(dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .collect();
    files.sort();
    Ok(files)
}

fn modes(compare: Option<&str>, default: GenMode) -> Result<Vec<GenMode>, Failure> {
    match compare {
        None => Ok(vec![default]),
        Some(list) => {
            let mut out = Vec::new();
            for m in list.split(',').map(str::trim).filter(|m| !m.is_empty()) {
                let m: GenMode = m.parse().map_err(Failure::config)?;
                if !out.contains(&m) {
                    out.push(m);
                }
            }
            if out.is_empty() {
                return Err(Failure::config("--compare needs at least one mode"));
            }
            Ok(out)
        }
    }
}

/// Runs one program on a helper thread so that a runaway pipeline can be
/// abandoned at the deadline. Solver children are bounded by their own
/// query timeout, so an abandoned pipeline winds down by itself.
fn run_one(settings: &Arc<Settings>, file: &Path, llm: Option<Arc<LlmClient>>, timeout_ms: u64) -> BenchEntry {
    let program = stem(file);
    let mode = settings.mode.to_string();
    let entry = |status: &str, error: Option<String>, report: Option<Report>| BenchEntry {
        program: program.clone(),
        mode: mode.clone(),
        status: status.to_string(),
        error,
        report,
    };
    let p = match load(file) {
        Ok(p) => p,
        Err(f) => return entry("ParseError", Some(f.message), None),
    };
    let (tx, rx) = mpsc::channel();
    let settings = Arc::clone(settings);
    let name = program.clone();
    std::thread::spawn(move || {
        let report = settings.run_infer(&p, &name, llm.as_deref());
        let _ = tx.send(report);
    });
    match rx.recv_timeout(Duration::from_millis(timeout_ms)) {
        Ok(report) => entry(&report.totals.verdict.clone(), None, Some(report)),
        Err(mpsc::RecvTimeoutError::Timeout) => entry("Timeout", Some(format!("no result within {timeout_ms} ms")), None),
        Err(mpsc::RecvTimeoutError::Disconnected) => entry("Error", Some("pipeline thread panicked".into()), None),
    }
}

/// Entries come back in file order regardless of `jobs`.
fn run_mode(settings: Settings, files: &[PathBuf], jobs: usize, timeout_ms: u64) -> Result<Vec<BenchEntry>, Failure> {
    let llm = settings.llm_client()?.map(Arc::new);
    let settings = Arc::new(settings);
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<BenchEntry>> = vec![None; files.len()];
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, files.len().max(1)) {
            let tx = tx.clone();
            let (settings, llm, next) = (&settings, &llm, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(file) = files.get(i) else { break };
                let _ = tx.send((i, run_one(settings, file, llm.clone(), timeout_ms)));
            });
        }
    });
    drop(tx);
    for (i, e) in rx {
        slots[i] = Some(e);
    }
    Ok(slots.into_iter().map(|e| e.expect("every file produces an entry")).collect())
}

pub fn aggregate(mode: GenMode, entries: &[BenchEntry]) -> Aggregate {
    let mine: Vec<&BenchEntry> = entries.iter().filter(|e| e.mode == mode.to_string()).collect();
    let n = mine.len();
    let mean = |f: &dyn Fn(&BenchEntry) -> u64| if n == 0 { 0.0 } else { mine.iter().map(|e| f(e) as f64).sum::<f64>() / n as f64 };
    Aggregate {
        mode: mode.to_string(),
        total: n,
        solved: mine.iter().filter(|e| e.status == "Solved").count(),
        mean_time_ms: mean(&|e| e.time_ms()),
        mean_smt_queries: mean(&|e| e.queries()),
    }
}

pub fn run_bench(cli_solver: Option<&str>, timeout_ms: u64, dir: &Path, gen: &GenArgs, opts: &BenchOptions) -> Result<BenchResult, Failure> {
    let files = programs(dir)?;
    let modes = modes(opts.compare.as_deref(), gen.mode)?;
    let mut entries = Vec::new();
    for &mode in &modes {
        let gen = GenArgs { mode, ..gen.clone() };
        let settings = Settings::new(cli_solver, timeout_ms, &gen)?;
        entries.extend(run_mode(settings, &files, opts.jobs, opts.program_timeout_ms)?);
    }
    let comparison = files
        .iter()
        .map(|f| {
            let program = stem(f);
            let statuses = modes
                .iter()
                .map(|m| {
                    entries
                        .iter()
                        .find(|e| e.program == program && e.mode == m.to_string())
                        .map_or_else(String::new, |e| e.status.clone())
                })
                .collect();
            ComparisonRow { program, statuses }
        })
        .collect();
    Ok(BenchResult {
        modes: modes.iter().map(|m| m.to_string()).collect(),
        seed: opts.seed,
        aggregate: modes.iter().map(|&m| aggregate(m, &entries)).collect(),
        entries,
        comparison,
    })
}

pub fn table(r: &BenchResult) -> String {
    let mut out = String::new();
    let width = r.comparison.iter().map(|c| c.program.len()).max().unwrap_or(7).max(7);
    out.push_str(&format!("{:<width$}", "program"));
    for m in &r.modes {
        out.push_str(&format!("  {:<14}", m));
    }
    out.push('\n');
    for row in &r.comparison {
        out.push_str(&format!("{:<width$}", row.program));
        for (s, m) in row.statuses.iter().zip(&r.modes) {
            let e = r.entries.iter().find(|e| &e.program == &row.program && &e.mode == m);
            let q = e.map_or(0, |e| e.queries());
            out.push_str(&format!("  {:<14}", format!("{s} ({q}q)")));
        }
        out.push('\n');
    }
    for a in &r.aggregate {
        out.push_str(&format!(
            "{}: {}/{} solved, mean {:.0} ms, mean {:.1} queries\n",
            a.mode, a.solved, a.total, a.mean_time_ms, a.mean_smt_queries
        ));
    }
    out
}

pub fn cmd_bench(cli_solver: Option<&str>, timeout_ms: u64, dir: &Path, gen: &GenArgs, opts: &BenchOptions) -> Result<u8, Failure> {
    let result = run_bench(cli_solver, timeout_ms, dir, gen, opts)?;
    let text = serde_json::to_string_pretty(&result).expect("bench result serializes");
    std::fs::write(&opts.out, format!("{text}\n")).map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", opts.out.display()) })?;
    if opts.json {
        out!("{text}");
    } else {
        outr!("{}", table(&result));
    }
    Ok(EXIT_OK)
}
