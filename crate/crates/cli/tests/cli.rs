use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn ownir(args: &[&str]) -> Output {
    ownir_in(&programs(), args, &[])
}

fn ownir_in(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ownir"));
    cmd.current_dir(dir).args(args).env_remove("OWNIR_SOLVER");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// A stand-in solver that prints `reply` whatever it is asked.
fn fake_solver(dir: &Path, reply: &str, exit: i32) -> PathBuf {
    let path = dir.join("solver.sh");
    std::fs::write(&path, format!("#!/bin/sh\ncat > /dev/null\nprintf '{reply}'\nexit {exit}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

#[test]
fn run_walkthrough_on_cached_machine() {
    let o = ownir(&["run", "borrow_walkthrough.oseair", "--machine", "m1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().last(), Some("r = 43"));
    assert!(out.contains("SB[0x4] = 3 :: 2 :: []"));
}

#[test]
fn run_reports_undefined_behavior() {
    let o = ownir(&["run", "ub.oseair"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("undefined behavior: tag-not-in-stack"));
}

#[test]
fn run_with_oracle_satisfying_both_assumptions() {
    assert_eq!(code(&ownir(&["run", "typestate.oseair", "--oracle", "42,1,50"])), 0);
    assert_eq!(code(&ownir(&["run", "typestate.oseair", "--oracle", "41"])), 3);
    assert_eq!(code(&ownir(&["run", "typestate_weak.oseair", "--oracle", "42,1,50"])), 1);
}

#[test]
fn run_json_and_step_limit() {
    let o = ownir(&["run", "borrow_walkthrough.oseair", "--json", "--no-trace"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "pass");
    assert_eq!(v["registers"].as_array().unwrap().last().unwrap(), &serde_json::json!(["r", "43"]));
    assert_eq!(code(&ownir(&["run", "looped.oseair", "--step-limit", "5"])), 70);
}

#[test]
fn usage_and_input_errors() {
    assert_eq!(code(&ownir(&["run"])), 64);
    assert_eq!(code(&ownir(&["run", "borrow_walkthrough.oseair", "--machine", "m9"])), 64);
    assert_eq!(code(&ownir(&["diff", "borrow_walkthrough.oseair", "--corpus", "0,3"])), 64);
    assert_eq!(code(&ownir(&["run", "missing.oseair"])), 66);
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.oseair"), "fun main() {\nBB0:\n  r = = 1\n}\n").unwrap();
    assert_eq!(code(&ownir_in(dir.path(), &["run", "bad.oseair"], &[])), 65);
}

#[test]
fn verify_valid_and_falsifiable() {
    for enc in ["ownsem", "baseline"] {
        let o = ownir(&["verify", "typestate.oseair", "--encoder", enc]);
        assert_eq!(code(&o), 0, "{enc}: {}{}", stdout(&o), stderr(&o));
    }
    let o = ownir(&["verify", "typestate_weak.oseair"]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.contains("proph_7 = "), "{out}");
    assert!(out.contains("replay on m0: assertion failed"), "{out}");
}

#[test]
fn verify_rejects_cycles() {
    let o = ownir(&["verify", "looped.oseair"]);
    assert_eq!(code(&o), 65);
    assert!(stderr(&o).contains("cyclic CFG"));
}

#[test]
fn emitted_script_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut scripts = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("vc{i}.smt2"));
        let o = ownir(&["verify", "typestate.oseair", "--emit-smt", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        scripts.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(scripts[0], scripts[1]);
    assert!(String::from_utf8_lossy(&scripts[0]).starts_with("(set-logic QF_BV)"));
}

#[test]
fn solver_unknown_and_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let typestate = programs().join("typestate.oseair");
    let typestate = typestate.to_str().unwrap();
    let unknown = fake_solver(dir.path(), "unknown\\n", 0);
    let o = ownir_in(dir.path(), &["verify", typestate], &[("OWNIR_SOLVER", unknown.to_str().unwrap())]);
    assert_eq!(code(&o), 4);
    let crash = fake_solver(dir.path(), "", 3);
    assert_eq!(code(&ownir_in(dir.path(), &["verify", typestate, "--solver", crash.to_str().unwrap()], &[])), 70);
    assert_eq!(code(&ownir_in(dir.path(), &["verify", typestate, "--solver", "/nonexistent/solver"], &[])), 70);
}

#[test]
fn config_file_sets_solver_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let typestate = programs().join("typestate.oseair");
    let typestate = typestate.to_str().unwrap();
    let unknown = fake_solver(dir.path(), "unknown\\n", 0);
    std::fs::write(dir.path().join("ownir.toml"), format!("[solver]\ncmd = \"{}\"\ntimeout_secs = 30\n", unknown.display()))
        .unwrap();
    assert_eq!(code(&ownir_in(dir.path(), &["verify", typestate], &[])), 4);
    assert_eq!(code(&ownir_in(dir.path(), &["verify", typestate, "--solver", "z3"], &[])), 0);
    std::fs::write(dir.path().join("broken.toml"), "[solver]\nbinary = 1\n").unwrap();
    assert_eq!(code(&ownir_in(dir.path(), &["verify", typestate, "--config", "broken.toml"], &[])), 64);
}

#[test]
fn diff_single_file_and_small_corpus() {
    assert_eq!(code(&ownir(&["diff", "borrow_walkthrough.oseair"])), 0);
    let o = ownir(&["diff", "--corpus", "0,10", "--full", "--json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["checked"], 10);
}

#[test]
fn diff_with_injected_fault_prints_reproducer() {
    let o = ownir(&["diff", "--corpus", "0,20", "--level", "m1", "--inject-fault", "skip-store-sync"]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.contains("reproducer ("), "{out}");
    assert!(out.contains("fun "), "{out}");
}

#[test]
fn bench_report_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = ownir(&["bench", "many_buffers", "--n", "2,4,8", "--reps", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 6);
    assert_eq!(v["speedups"].as_array().unwrap().len(), 3);
    assert_eq!(v["reference_speedup"], serde_json::json!([1.3, 5.0]));

    let o = ownir(&["bench", "file_typestate", "--n", "1", "--reps", "1", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let cells = v["records"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c["verdict"] == "unsat"));
}

#[test]
fn bench_records_solver_failures_as_error_cells() {
    let o = ownir(&["bench", "many_buffers", "--n", "2", "--reps", "1", "--solver", "/nonexistent/solver", "--json"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let cells = v["records"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c["error"].is_string()));
}
