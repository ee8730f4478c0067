//! `pathinv`: verify, infer and benchmark loop invariants of MiniC programs.
//!
//! Exit codes: 0 success, 1 verification or inference failure, 2 parse or
//! configuration error, 3 inconclusive solver result.

/// `println!` without the panic on a closed stdout, so `pathinv ... | head`
/// exits quietly.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

/// `print!` counterpart of `out!`.
macro_rules! outr {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

mod bench;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pathinv_core::candidates::{GenMode, GeneratorBudget, LlmClient, LlmConfig, Provider};
use pathinv_core::cfg::{build_cfg, to_dot};
use pathinv_core::frontend::{parse_formula, parse_program, LoopId, Program};
use pathinv_core::logic::Predicate;
use pathinv_core::paths::{find_all_paths, order_by_priority};
use pathinv_core::smt::{Solver, SolverConfig};
use pathinv_core::summarize::{infer_program, verify_program, PipelineOptions, Report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "pathinv", version, about = "Loop invariant inference and verification for MiniC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// SMT solver executable (default: $PATHINV_SOLVER, then z3 or cvc5 on PATH).
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Timeout for a single solver query.
    #[arg(long, global = true, default_value_t = 10_000)]
    timeout_ms: u64,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized utilities; the pipeline itself is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Check one invariant per loop (from --invariant or gold annotations).
    Verify {
        /// MiniC source file.
        file: PathBuf,
        /// Invariant for loop K, e.g. `--invariant 0='x <= n'`.
        #[arg(long = "invariant", value_name = "K=EXPR")]
        invariants: Vec<String>,
    },
    /// Infer invariants for every loop.
    Infer {
        /// MiniC source file.
        file: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Show the ordered path segments, or the CFG as DOT.
    Paths {
        /// MiniC source file.
        file: PathBuf,
        /// Print the control-flow graph in Graphviz DOT instead.
        #[arg(long)]
        dot: bool,
    },
    /// Run `infer` over every `.mc` file of a directory.
    Bench {
        /// Directory whose `.mc` files are run, in name order.
        dir: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        /// Comma-separated modes to run and tabulate side by side.
        #[arg(long)]
        compare: Option<String>,
        /// Programs run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Where the JSON results are written.
        #[arg(long, default_value = "bench.json")]
        out: PathBuf,
        /// Wall-clock limit per program.
        #[arg(long, default_value_t = 120_000)]
        program_timeout_ms: u64,
    },
}

#[derive(Args, Clone)]
pub struct GenArgs {
    /// Candidate source: combinor, llm or hybrid.
    #[arg(long, default_value = "combinor", value_parser = parse_mode)]
    pub mode: GenMode,
    /// OpenAI-compatible chat-completions URL; the key is read from $PATHINV_LLM_KEY.
    #[arg(long)]
    pub llm_endpoint: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long, default_value = "gpt-4o-mini")]
    pub llm_model: String,
    /// Canned LLM transcripts (JSON: prompt SHA-256 -> response).
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Maximum generation rounds per loop.
    #[arg(long, default_value_t = GeneratorBudget::default().max_rounds)]
    pub budget_rounds: usize,
    /// Largest number of clauses joined into one candidate.
    #[arg(long, default_value_t = GeneratorBudget::default().max_combination_size)]
    pub max_combination_size: usize,
    /// Time limit for inferring one loop.
    #[arg(long, default_value_t = GeneratorBudget::default().total_timeout_ms)]
    pub loop_timeout_ms: u64,
    /// Check every candidate with the solver, skipping counterexample pruning.
    #[arg(long)]
    pub no_filter: bool,
}

fn parse_mode(s: &str) -> Result<GenMode, String> {
    s.parse()
}

/// A failure that ends the command with a specific exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }
}

pub fn load(path: &Path) -> Result<Program, Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    // Frontend errors display as `line:col: message`.
    parse_program(&src).map_err(|e| Failure::config(format!("{}:{e}", path.display())))
}

pub fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("program").to_string()
}

pub struct Settings {
    pub solver: SolverConfig,
    pub budget: GeneratorBudget,
    pub mode: GenMode,
    pub filter: bool,
    pub llm: Option<LlmConfig>,
}

impl Settings {
    pub fn new(cli_solver: Option<&str>, timeout_ms: u64, gen: &GenArgs) -> Result<Settings, Failure> {
        let budget = GeneratorBudget {
            max_rounds: gen.budget_rounds,
            max_combination_size: gen.max_combination_size,
            total_timeout_ms: gen.loop_timeout_ms,
            ..GeneratorBudget::default()
        };
        budget.validate().map_err(Failure::config)?;
        // A single query never outlives the candidate it belongs to.
        let timeout = timeout_ms.min(budget.per_candidate_timeout_ms);
        let solver = SolverConfig::discover(cli_solver, timeout).map_err(|e| Failure::config(e.to_string()))?;
        let llm = match (gen.mode, &gen.mock, &gen.llm_endpoint) {
            (_, Some(mock), _) => Some(LlmConfig::mock(mock)),
            (_, None, Some(url)) => Some(LlmConfig::http(url.clone(), gen.llm_model.clone())),
            (GenMode::Combinor, None, None) => None,
            (mode, None, None) => return Err(Failure::config(format!("--mode {mode} needs --llm-endpoint or --mock"))),
        };
        Ok(Settings { solver, budget, mode: gen.mode, filter: !gen.no_filter, llm })
    }

    pub fn llm_client(&self) -> Result<Option<LlmClient>, Failure> {
        match &self.llm {
            Some(cfg) if self.mode != GenMode::Combinor => LlmClient::new(cfg.clone()).map(Some).map_err(|e| Failure::config(e.to_string())),
            _ => Ok(None),
        }
    }

    pub fn run_infer(&self, p: &Program, name: &str, llm: Option<&LlmClient>) -> Report {
        let solver = Solver::new(self.solver.clone());
        let opts = PipelineOptions { mode: self.mode, budget: self.budget, filter: self.filter, llm };
        let (mut report, _) = infer_program(p, &solver, &opts);
        report.program = name.to_string();
        // A mock run is a replay; timings would be its only unstable bytes.
        if matches!(self.llm, Some(LlmConfig { provider: Provider::Mock(_), .. })) && self.mode != GenMode::Combinor {
            report.strip_timing();
        }
        report
    }
}

pub fn exit_for(report: &Report) -> u8 {
    match report.totals.verdict.as_str() {
        "Solved" => EXIT_OK,
        "Inconclusive" => EXIT_INCONCLUSIVE,
        _ => EXIT_FAIL,
    }
}

fn print_report(r: &Report, json: bool) {
    if json {
        out!("{}", r.to_json());
        return;
    }
    out!("{} [{} / {}]", r.program, r.mode, r.solver);
    for l in &r.loops {
        out!(
            "  loop {}: {} {} (rounds {}, refinement {}, queries {}, {} ms)",
            l.loop_id,
            l.status,
            l.invariant.as_deref().unwrap_or("-"),
            l.rounds,
            l.refinement_rounds,
            l.smt_queries,
            l.time_ms
        );
        for ce in l.counterexamples.iter().take(3) {
            let show = |s: &BTreeMap<String, i64>| s.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ");
            match &ce.post_state {
                Some(post) => out!("    {:?} counterexample: {{{}}} -> {{{}}}", ce.kind, show(&ce.state), show(post)),
                None => out!("    {:?} counterexample: {{{}}}", ce.kind, show(&ce.state)),
            }
        }
        if let Some(n) = &l.note {
            out!("    note: {n}");
        }
    }
    out!(
        "  loop-free obligations: {}; verdict: {} ({} queries)",
        r.totals.loop_free_obligations, r.totals.verdict, r.totals.smt_queries
    );
}

fn parse_invariant_flag(s: &str) -> Result<(LoopId, Predicate), Failure> {
    let (k, e) = s.split_once('=').ok_or_else(|| Failure::config(format!("--invariant `{s}`: expected K=EXPR")))?;
    let k: usize = k.trim().parse().map_err(|_| Failure::config(format!("--invariant `{s}`: `{k}` is not a loop number")))?;
    let f = parse_formula(e).map_err(|err| Failure::config(format!("--invariant {k}: {err}")))?;
    let p = Predicate::new(f).map_err(|err| Failure::config(format!("--invariant {k}: {err}")))?;
    Ok((LoopId(k), p))
}

fn cmd_verify(cli: &Cli, file: &Path, flags: &[String]) -> Result<u8, Failure> {
    let p = load(file)?;
    let ids = p.loop_ids();
    let mut invariants: BTreeMap<LoopId, Predicate> = ids
        .iter()
        .filter_map(|&k| p.gold_invariant(k).map(|g| (k, Predicate::from_expr(g.clone()))))
        .collect();
    for f in flags {
        let (k, inv) = parse_invariant_flag(f)?;
        invariants.insert(k, inv);
    }
    if let Some(k) = invariants.keys().find(|k| !ids.contains(k)) {
        return Err(Failure::config(format!("no loop {k} in {}", file.display())));
    }
    if let Some(k) = ids.iter().find(|k| !invariants.contains_key(k)) {
        return Err(Failure::config(format!("no invariant for loop {k}: pass --invariant {k}=EXPR or add a gold_invariant[{k}] annotation")));
    }
    let solver = Solver::new(SolverConfig::discover(cli.solver.as_deref(), cli.timeout_ms).map_err(|e| Failure::config(e.to_string()))?);
    let mut report = verify_program(&p, &invariants, &solver).map_err(|e| Failure::config(e.to_string()))?;
    report.program = stem(file);
    print_report(&report, cli.json);
    Ok(exit_for(&report))
}

fn cmd_infer(cli: &Cli, file: &Path, gen: &GenArgs) -> Result<u8, Failure> {
    let p = load(file)?;
    let settings = Settings::new(cli.solver.as_deref(), cli.timeout_ms, gen)?;
    let llm = settings.llm_client()?;
    let report = settings.run_infer(&p, &stem(file), llm.as_ref());
    print_report(&report, cli.json);
    Ok(exit_for(&report))
}

fn cmd_paths(cli: &Cli, file: &Path, dot: bool) -> Result<u8, Failure> {
    let p = load(file)?;
    let g = build_cfg(&p);
    if dot {
        outr!("{}", to_dot(&g));
        return Ok(EXIT_OK);
    }
    let ps = order_by_priority(find_all_paths(&g));
    if cli.json {
        let segs: Vec<_> = ps
            .segments
            .iter()
            .map(|s| {
                json!({
                    "region": s.region,
                    "depth": s.depth,
                    "position": s.position,
                    "assumed": s.assumed.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                    "stmts": s.stmts.iter().map(|st| st.to_string()).collect::<Vec<_>>(),
                    "enclosing": s.enclosing,
                })
            })
            .collect();
        out!("{}", serde_json::to_string_pretty(&json!({ "program": stem(file), "segments": segs })).expect("json"));
        return Ok(EXIT_OK);
    }
    for s in &ps.segments {
        let assumed: Vec<String> = s.assumed.iter().map(|e| e.to_string()).collect();
        out!("{} (depth {}, node {}) assuming [{}]", s.region, s.depth, s.position, assumed.join(", "));
        for st in &s.stmts {
            out!("    {st}");
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { file, invariants } => cmd_verify(&cli, file, invariants),
        Command::Infer { file, gen } => cmd_infer(&cli, file, gen),
        Command::Paths { file, dot } => cmd_paths(&cli, file, *dot),
        Command::Bench { dir, gen, compare, jobs, out, program_timeout_ms } => {
            let opts = bench::BenchOptions {
                compare: compare.clone(),
                jobs: *jobs,
                out: out.clone(),
                program_timeout_ms: *program_timeout_ms,
                seed: cli.seed,
                json: cli.json,
            };
            bench::cmd_bench(cli.solver.as_deref(), cli.timeout_ms, dir, gen, &opts)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
