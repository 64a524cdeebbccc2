use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sepolicy-smt");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/android11")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_path(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (flag, path) in paths {
        cmd.arg(flag).arg(path);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn case_study_exit_codes() {
    let constraints = fixture("constraints.smt2");
    for (policy, code, word) in [
        ("policy.te", 1, "unsat"),
        ("policy_patched.te", 0, "sat"),
        ("policy_neverallow.te", 0, "sat"),
    ] {
        let o = run_path(
            &["verify"],
            &[
                ("--policy", &fixture(policy)),
                ("--constraints", &constraints),
            ],
        );
        assert_eq!(o.status.code(), Some(code), "{policy}: {}", stderr(&o));
        assert!(
            stdout(&o).starts_with(&format!("{word}:")),
            "{}",
            stdout(&o)
        );
    }
}

#[test]
fn empty_policy_verifies_sat() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.te");
    std::fs::write(&empty, "").unwrap();
    let o = run_path(&["verify"], &[("--policy", &empty)]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn parse_errors_exit_3_with_locations() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.te");
    std::fs::write(&bad, "type a;\nallow a ghost : file read;\nrole ;\n").unwrap();
    let o = run_path(&["verify"], &[("--policy", &bad)]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("bad.te:3:6:"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn semantic_errors_listed() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.te");
    std::fs::write(
        &bad,
        "class file { read }\ntype a;\nallow a ghost : file read;\nallow a a : file write;\n",
    )
    .unwrap();
    let o = run_path(&["verify", "--format", "json"], &[("--policy", &bad)]);
    assert_eq!(o.status.code(), Some(3));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let errors = doc["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 2, "{doc}");
    assert_eq!(errors[0]["line"], 3);
    assert_eq!(errors[1]["line"], 4);
    assert!(doc["verdict"].is_null());
}

#[test]
fn json_report_shape() {
    let o = run_path(
        &["verify", "--format", "json"],
        &[
            ("--policy", &fixture("policy.te")),
            ("--constraints", &fixture("constraints.smt2")),
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["command"], "verify");
    assert_eq!(doc["verdict"], "unsat");
    assert_eq!(doc["exit_code"], 1);
    assert!(doc["errors"].as_array().unwrap().is_empty());
    for key in ["parse_s", "encode_s", "constraints_s", "solve_s"] {
        assert!(doc["timings"][key].as_f64().unwrap() >= 0.0, "{key}");
    }
}

#[test]
fn constraint_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.smt2");
    std::fs::write(
        &c,
        "(assert (av-allow nonexistent_t apk_data_file_t file write))\n",
    )
    .unwrap();
    let o = run_path(
        &["verify"],
        &[("--policy", &fixture("policy.te")), ("--constraints", &c)],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("c.smt2:1:19:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("nonexistent_t"));
}

#[test]
fn missing_files_exit_3() {
    let o = run(&["verify", "--policy", "/nonexistent/policy.te"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run_path(
        &["verify", "--constraints", "/nonexistent/c.smt2"],
        &[("--policy", &fixture("policy.te"))],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn missing_solver_exit_3() {
    let o = run_path(
        &["verify", "--solver", "/nonexistent/z3"],
        &[("--policy", &fixture("policy.te"))],
    );
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(BIN)
        .args(["verify", "--policy"])
        .arg(fixture("policy.te"))
        .env("SEPOLICY_SMT_SOLVER", "/nonexistent/z3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/nonexistent/z3"));
}

#[cfg(unix)]
#[test]
fn undecided_output_exit_2() {
    // cat echoes the script back, which contains no verdict line
    let o = run_path(
        &["verify", "--solver", "cat"],
        &[("--policy", &fixture("policy.te"))],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("unknown"));
}

#[test]
fn solver_arguments_pass_through() {
    // z3 rejects an unknown option and prints no verdict
    let o = run_path(
        &[
            "verify",
            "--solver",
            "z3",
            "--solver-arg",
            "-no-such-option",
        ],
        &[("--policy", &fixture("policy.te"))],
    );
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn timeout_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("big.te");
    let bench = sepolicy_smt::generate(sepolicy_smt::BenchmarkSpec::new(1500).unwrap());
    std::fs::write(&policy, bench.policy).unwrap();
    let o = run_path(
        &["verify", "--timeout", "0.5", "--format", "json"],
        &[("--policy", &policy)],
    );
    assert_eq!(o.status.code(), Some(2));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["reason"], "timeout");
    assert_eq!(
        run(&["verify", "--timeout", "0", "--policy", "x"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn emit_smt_writes_script() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("n2.te");
    std::fs::write(
        &policy,
        sepolicy_smt::generate(sepolicy_smt::BenchmarkSpec::new(2).unwrap()).policy,
    )
    .unwrap();
    let out = dir.path().join("out.smt2");
    let o = run_path(
        &["emit-smt"],
        &[("--policy", &policy), ("--emit-smt", &out)],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("(declare-const user_0_u User)\n"));
    assert!(text.ends_with("(check-sat)\n"));

    let o = run_path(&["emit-smt"], &[("--policy", &policy)]);
    assert_eq!(stdout(&o), text);
}

#[test]
fn emit_smt_on_malformed_policy_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.te");
    std::fs::write(&bad, "allow a b : c d").unwrap();
    let out = dir.path().join("out.smt2");
    let o = run_path(&["emit-smt"], &[("--policy", &bad), ("--emit-smt", &out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn verify_emit_matches_emit_smt() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.smt2");
    let b = dir.path().join("b.smt2");
    let policy = fixture("policy.te");
    let constraints = fixture("constraints.smt2");
    run_path(
        &["verify"],
        &[
            ("--policy", &policy),
            ("--constraints", &constraints),
            ("--emit-smt", &a),
        ],
    );
    run_path(
        &["emit-smt"],
        &[
            ("--policy", &policy),
            ("--constraints", &constraints),
            ("-o", &b),
        ],
    );
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn repeated_constraints_concatenate() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("1.smt2");
    let second = dir.path().join("2.smt2");
    std::fs::write(&first, "(declare-const extra Type)\n").unwrap();
    std::fs::write(&second, "(assert (= extra system_app_t))\n").unwrap();
    let o = run_path(
        &["emit-smt"],
        &[
            ("--policy", &fixture("policy.te")),
            ("--constraints", &first),
            ("--constraints", &second),
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let tail = text.split(";; ---- constraints ----\n").nth(1).unwrap();
    assert_eq!(
        tail,
        "(declare-const extra Type)\n(assert (= extra system_app_t))\n(check-sat)\n"
    );
}

#[test]
fn bench_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let artifacts = dir.path().join("art");
    let o = run_path(
        &["bench", "--ns", "1,2", "--repeat", "2"],
        &[("--csv", &csv), ("--keep-artifacts", &artifacts)],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,parse_s,encode_s,solve_s,verdict");
    assert!(rows[1].starts_with("1,") && rows[1].ends_with(",sat"));
    assert!(rows[2].starts_with("2,") && rows[2].ends_with(",sat"));
    assert!(artifacts.join("bench_2.smt2").exists());
    assert_eq!(run(&["bench", "--ns", "0"]).status.code(), Some(3));
}

#[test]
fn help_documents_flags() {
    let o = run(&["verify", "--help"]);
    let text = stdout(&o);
    for flag in [
        "--policy",
        "--constraints",
        "--solver",
        "--solver-arg",
        "--timeout",
        "--emit-smt",
        "--format",
        "SEPOLICY_SMT_SOLVER",
    ] {
        assert!(text.contains(flag), "{flag}");
    }
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(run(&["verify"]).status.code(), Some(3));
}
