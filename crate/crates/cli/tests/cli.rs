//! The `pathinv` binary: exit codes, output shapes and bench isolation.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn pathinv(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_pathinv")).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn program(name: &str) -> String {
    corpus().join(name).to_string_lossy().into_owned()
}

fn json(r: &Run) -> Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{e}: {}\n{}", r.stdout, r.stderr))
}

/// Validator for one definition of docs/schema.json.
fn schema(def: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schema.json");
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    doc["$ref"] = Value::String(format!("#/$defs/{def}"));
    jsonschema::validator_for(&doc).expect("schema compiles")
}

fn assert_conforms(def: &str, v: &Value) {
    let errors: Vec<String> = schema(def).iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{def}: {}\n{v:#}", errors.join("\n"));
}

fn corpus_files() -> Vec<String> {
    let mut files: Vec<String> = std::fs::read_dir(corpus())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    files.sort();
    files
}

#[test]
fn verify_with_gold_annotations_succeeds() {
    let r = pathinv(&["verify", &program("count-up.mc")]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("Valid"), "{}", r.stdout);
}

#[test]
fn verify_reports_a_preservation_counterexample() {
    let r = pathinv(&["verify", &program("count-up.mc"), "--invariant", "0=x == 0"]);
    assert_eq!(r.code, 1, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("PreserveFail"), "{}", r.stdout);
    let line = r.stdout.lines().find(|l| l.contains("counterexample")).expect("a counterexample line");
    assert!(line.contains("->"), "preserve counterexamples show the post state: {line}");

    let r = pathinv(&["--json", "verify", &program("count-up.mc"), "--invariant", "0=x == 0"]);
    let v = json(&r);
    assert_conforms("report", &v);
    let ce = &v["loops"][0]["counterexamples"][0];
    assert_eq!(ce["kind"], "preserve");
    assert_eq!(ce["state"]["x"], 0);
    assert_eq!(ce["post_state"]["x"], 1);
}

#[test]
fn configuration_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bare = dir.path().join("bare.mc");
    std::fs::write(&bare, "//@ post: x == n\nint main() { int x, n; x = 0; while (x < n) { x = x + 1; } }\n").unwrap();
    let r = pathinv(&["verify", bare.to_str().unwrap()]);
    assert_eq!(r.code, 2, "no invariant for the loop: {}", r.stderr);
    assert!(r.stderr.contains("--invariant 0="), "{}", r.stderr);

    let r = pathinv(&["verify", bare.to_str().unwrap(), "--invariant", "3=x <= n"]);
    assert_eq!(r.code, 2, "unknown loop: {}", r.stderr);

    let r = pathinv(&["verify", bare.to_str().unwrap(), "--invariant", "0=x <= "]);
    assert_eq!(r.code, 2, "malformed invariant: {}", r.stderr);

    let broken = dir.path().join("broken.mc");
    std::fs::write(&broken, "int main() {\n  int x;\n  x = ;\n}\n").unwrap();
    let r = pathinv(&["infer", broken.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with(&format!("error: {}:3:7: parse error", broken.display())), "parse errors carry a position: {}", r.stderr);

    let r = pathinv(&["infer", &program("count-up.mc"), "--mode", "llm"]);
    assert_eq!(r.code, 2, "llm mode needs a transcript or endpoint: {}", r.stderr);

    let r = pathinv(&["infer", &program("count-up.mc"), "--mode", "oracle"]);
    assert_eq!(r.code, 2, "unknown mode: {}", r.stderr);

    let r = pathinv(&["--solver", "/nonexistent/z3", "infer", &program("count-up.mc")]);
    assert_eq!(r.code, 2, "missing solver: {}", r.stderr);
}

#[test]
fn inferred_invariant_verifies_independently() {
    for name in ["count-up.mc", "nested-branch.mc", "nested-loop.mc"] {
        let r = pathinv(&["--json", "infer", &program(name)]);
        assert_eq!(r.code, 0, "{name}: {}", r.stdout);
        let v = json(&r);
        assert_conforms("report", &v);
        let mut args = vec!["verify".to_string(), program(name)];
        for l in v["loops"].as_array().unwrap() {
            assert_eq!(l["status"], "Solved");
            args.push("--invariant".into());
            args.push(format!("{}={}", l["loop_id"], l["invariant"].as_str().unwrap()));
        }
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let r = pathinv(&args);
        assert_eq!(r.code, 0, "{name}: {}", r.stdout);
    }
}

#[test]
fn exhausted_search_exits_with_one() {
    let r = pathinv(&["--json", "infer", &program("sum-transfer.mc")]);
    assert_eq!(r.code, 1);
    let v = json(&r);
    assert_conforms("report", &v);
    assert_eq!(v["totals"]["verdict"], "Failed");
    assert!(v["loops"].as_array().unwrap().iter().any(|l| l["status"] == "Exhausted" && l["invariant"].is_null()));
}

#[test]
fn mock_llm_run_conforms_and_solves() {
    let mock = corpus().join("mock/llm.json");
    let r = pathinv(&["--json", "infer", &program("double-step.mc"), "--mode", "llm", "--mock", mock.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let v = json(&r);
    assert_conforms("report", &v);
    assert_eq!(v["mode"], "llm");
    assert_eq!(v["totals"]["time_ms"], 0, "mock replays carry no wall-clock time");
}

#[test]
fn paths_output_for_every_program() {
    for f in corpus_files() {
        let r = pathinv(&["--json", "paths", &f]);
        assert_eq!(r.code, 0, "{f}");
        let v = json(&r);
        assert_conforms("paths", &v);
        let segs = v["segments"].as_array().unwrap();
        assert_eq!(segs.last().unwrap()["region"], "top", "{f}: top level comes last");

        let r = pathinv(&["paths", "--dot", &f]);
        assert_eq!(r.code, 0);
        assert!(r.stdout.starts_with("digraph"), "{f}: {}", r.stdout);
        assert!(r.stdout.trim_end().ends_with('}'));
    }
}

#[test]
fn schema_rejects_malformed_reports() {
    let r = pathinv(&["--json", "infer", &program("count-up.mc")]);
    let good = json(&r);
    assert_conforms("report", &good);
    let v = schema("report");
    let mut bad = good.clone();
    bad["loops"][0]["status"] = "Maybe".into();
    assert!(!v.is_valid(&bad));
    let mut bad = good.clone();
    bad["totals"].as_object_mut().unwrap().remove("verdict");
    assert!(!v.is_valid(&bad));
    let mut bad = good;
    bad["loops"][0]["counterexamples"] = serde_json::json!([{ "kind": "init", "state": { "x": 1 }, "post_state": { "x": 2 } }]);
    assert!(!v.is_valid(&bad), "only preserve counterexamples carry a post state");
}

#[test]
fn bench_isolates_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["count-up.mc", "reset-counter.mc"] {
        std::fs::copy(corpus().join(name), dir.path().join(name)).unwrap();
    }
    std::fs::write(dir.path().join("garbled.mc"), "int main() { while ( }").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "not a program").unwrap();
    let out = dir.path().join("bench.json");
    let r = pathinv(&["--json", "bench", dir.path().to_str().unwrap(), "--jobs", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(&r);
    assert_conforms("bench", &v);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, v, "--out holds the same document");

    let status = |p: &str| v["entries"].as_array().unwrap().iter().find(|e| e["program"] == p).unwrap()["status"].clone();
    assert_eq!(v["entries"].as_array().unwrap().len(), 3, "only .mc files count");
    assert_eq!(status("garbled"), "ParseError");
    assert_eq!(status("count-up"), "Solved");
    assert_eq!(status("reset-counter"), "Solved");
    let agg = &v["aggregate"][0];
    assert_eq!((agg["total"].as_u64(), agg["solved"].as_u64()), (Some(3), Some(2)));
    let names: Vec<&str> = v["entries"].as_array().unwrap().iter().map(|e| e["program"].as_str().unwrap()).collect();
    assert_eq!(names, ["count-up", "garbled", "reset-counter"], "entries follow file order");
}

#[test]
fn bench_on_an_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let r = pathinv(&["--json", "bench", dir.path().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(&r);
    assert_conforms("bench", &v);
    assert_eq!(v["aggregate"][0]["total"], 0);
    assert_eq!(v["aggregate"][0]["mean_smt_queries"], 0.0);
}

#[test]
fn bench_compares_modes_side_by_side() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["count-up.mc", "double-step.mc"] {
        std::fs::copy(corpus().join(name), dir.path().join(name)).unwrap();
    }
    let mock = corpus().join("mock/llm.json");
    let out = dir.path().join("out.json");
    let r = pathinv(&[
        "--json",
        "bench",
        dir.path().to_str().unwrap(),
        "--compare",
        "combinor,llm",
        "--mock",
        mock.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(&r);
    assert_conforms("bench", &v);
    let rows: Vec<(String, Vec<String>)> = v["comparison"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            let s = c["statuses"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
            (c["program"].as_str().unwrap().to_string(), s)
        })
        .collect();
    assert_eq!(rows[1], ("double-step".to_string(), vec!["Failed".to_string(), "Solved".to_string()]));
    assert_eq!(rows[0].1[0], "Solved");

    let r = pathinv(&["bench", dir.path().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.stdout.contains("combinor: 1/2 solved"), "{}", r.stdout);
}

#[test]
fn closed_stdout_is_not_a_crash() {
    use std::io::Read;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_pathinv"))
        .args(["paths", "--dot", &program("nested-loop.mc")])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let status = child.wait().unwrap();
    let mut err = String::new();
    child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    assert!(!err.contains("panicked"), "{err}");
    assert_eq!(status.code(), Some(0));
}
