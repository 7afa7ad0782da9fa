use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bagsched(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bagsched"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) {
    std::fs::write(dir.path().join(name), text).unwrap();
}

const SMALL: &str = r#"{"machines":2,"jobs":[
  {"id":"a","size":{"num":1,"den":2},"bag":"B"},
  {"id":"b","size":{"num":1,"den":2},"bag":"B"},
  {"id":"c","size":{"num":1,"den":3},"bag":"C"}]}"#;

#[test]
fn gen_solve_validate_round_trip() {
    let dir = TempDir::new().unwrap();
    let gen = bagsched(
        dir.path(),
        &["gen", "--jobs", "7", "--machines", "3", "--bags", "3", "--seed", "9", "--feasible", "-o", "i.json"],
    );
    assert!(gen.status.success());
    for alg in ["eptas", "lpt", "brute"] {
        let solved = bagsched(dir.path(), &["solve", "i.json", "--algorithm", alg, "--eps", "1/3", "-o", "s.json"]);
        assert!(solved.status.success(), "{alg}: {}", String::from_utf8_lossy(&solved.stderr));
        let checked = bagsched(dir.path(), &["validate", "i.json", "s.json"]);
        assert!(checked.status.success());
        assert!(stdout(&checked).contains("feasible"));
    }
}

#[test]
fn trace_export_and_explain() {
    let dir = TempDir::new().unwrap();
    write(&dir, "i.json", SMALL);
    let solved = bagsched(
        dir.path(),
        &["solve", "i.json", "--trace", "t.json", "--lp-export", "m.lp", "--force-bprime", "0"],
    );
    assert!(solved.status.success(), "{}", String::from_utf8_lossy(&solved.stderr));
    assert!(stdout(&solved).contains("\"assignment\""));
    let lp = std::fs::read_to_string(dir.path().join("m.lp")).unwrap();
    assert!(lp.contains("Subject To") && lp.trim_end().ends_with("End"));
    let explained = bagsched(dir.path(), &["explain", "t.json"]);
    assert!(explained.status.success());
    let text = stdout(&explained);
    assert!(text.contains("accepted") && text.contains("solve_milp"));
}

#[test]
fn same_flags_same_bytes() {
    let dir = TempDir::new().unwrap();
    write(&dir, "i.json", SMALL);
    let a = bagsched(dir.path(), &["solve", "i.json", "--trace", "t1.json"]);
    let b = bagsched(dir.path(), &["solve", "i.json", "--trace", "t2.json"]);
    assert_eq!(a.stdout, b.stdout);
    let t1 = std::fs::read(dir.path().join("t1.json")).unwrap();
    let t2 = std::fs::read(dir.path().join("t2.json")).unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    write(&dir, "i.json", SMALL);
    write(
        &dir,
        "crowded.json",
        r#"{"machines":1,"jobs":[{"id":"a","size":{"num":1,"den":1},"bag":"x"},{"id":"b","size":{"num":1,"den":1},"bag":"x"}]}"#,
    );
    write(&dir, "broken.json", "{\"machines\": 1,");
    let code = |args: &[&str]| bagsched(dir.path(), args).status.code();
    assert_eq!(code(&["solve", "crowded.json"]), Some(2));
    assert_eq!(code(&["solve", "crowded.json", "--algorithm", "lpt"]), Some(2));
    assert_eq!(code(&["solve", "i.json", "--node-budget", "1"]), Some(3));
    assert_eq!(code(&["solve", "broken.json"]), Some(4));
    assert_eq!(code(&["solve", "i.json", "--eps", "2/3"]), Some(4));
    assert_eq!(code(&["gen", "--jobs", "9", "--machines", "2", "--bags", "2", "--feasible"]), Some(4));
}

#[test]
fn invalid_schedule_fails_validation() {
    let dir = TempDir::new().unwrap();
    write(&dir, "i.json", SMALL);
    write(&dir, "s.json", r#"{"assignment":{"a":0,"b":0,"c":1}}"#);
    let out = bagsched(dir.path(), &["validate", "i.json", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("conflict: machine 0 bag B"));
}

#[test]
fn bench_over_a_directory() {
    let dir = TempDir::new().unwrap();
    std::fs::create_dir(dir.path().join("corpus")).unwrap();
    for seed in ["1", "2"] {
        let out = format!("corpus/g{seed}.json");
        let gen = bagsched(
            dir.path(),
            &["gen", "--jobs", "5", "--machines", "2", "--bags", "3", "--seed", seed, "--feasible", "-o", &out],
        );
        assert!(gen.status.success());
    }
    let out = bagsched(
        dir.path(),
        &["bench", "corpus", "--algorithms", "eptas,lpt", "--eps", "1/2,1/3", "--jsonl", "rows.jsonl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // Header plus 2 instances × (2 eps for eptas + 1 lpt).
    assert_eq!(stdout(&out).lines().count(), 7);
    let rows = std::fs::read_to_string(dir.path().join("rows.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), 6);
    for line in rows.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["ratio"].as_f64().unwrap() >= 1.0);
    }
}
