//! Shared fixtures for the criterion benches: corpus programs and a solver.

use std::path::PathBuf;

use pathinv_core::frontend::{parse_program, Program};
use pathinv_core::smt::{Solver, SolverConfig};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Source of every `.mc` file in the corpus, sorted by name.
pub fn corpus_sources() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).expect("readable")))
        .collect();
    out.sort();
    out
}

pub fn corpus_program(name: &str) -> Program {
    let src = std::fs::read_to_string(corpus_dir().join(format!("{name}.mc"))).expect("corpus program");
    parse_program(&src).expect("corpus parses")
}

/// `None` when no solver is installed; solver-bound benches are skipped.
pub fn solver() -> Option<Solver> {
    SolverConfig::discover(None, 10_000).ok().map(Solver::new)
}
