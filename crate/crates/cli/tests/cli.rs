use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn satin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satin"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

const SAT: &str = "p cnf 3 3\n1 2 0\n-1 3 0\n-2 -3 0\n";
// every assignment of two variables is excluded
const UNSAT: &str = "p cnf 2 4\n1 2 0\n-1 2 0\n1 -2 0\n-1 -2 0\n";

#[test]
fn exit_codes_follow_dimacs_convention() {
    let dir = tempfile::tempdir().unwrap();
    let sat = write(&dir, "sat.cnf", SAT);
    let unsat = write(&dir, "unsat.cnf", UNSAT);
    let out = satin(&["solve", sat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("s SATISFIABLE"));
    let model: Vec<i64> = text
        .lines()
        .find_map(|l| l.strip_prefix("v "))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(model.last(), Some(&0));
    let truth = |v: i64| model.contains(&v);
    assert!((truth(1) || truth(2)) && (truth(-1) || truth(3)) && (truth(-2) || truth(-3)));

    let out = satin(&["solve", unsat.to_str().unwrap(), "--contexts", "2"]);
    assert_eq!(out.status.code(), Some(20));
}

#[test]
fn budget_exhaustion_is_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let mut php = String::from("p cnf 20 45\n");
    // five pigeons, four holes
    for p in 0..5 {
        let row: Vec<String> = (0..4).map(|h| (p * 4 + h + 1).to_string()).collect();
        php += &format!("{} 0\n", row.join(" "));
    }
    for h in 0..4 {
        for a in 0..5 {
            for b in a + 1..5 {
                php += &format!("-{} -{} 0\n", a * 4 + h + 1, b * 4 + h + 1);
            }
        }
    }
    let f = write(&dir, "php.cnf", &php);
    let out = satin(&["solve", f.to_str().unwrap(), "--max-conflicts", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("s UNKNOWN"));
}

#[test]
fn stats_and_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "u.cnf", UNSAT);
    let stats = dir.path().join("s.json");
    let trace = dir.path().join("t.csv");
    let run = || {
        let out = satin(&[
            "solve",
            f.to_str().unwrap(),
            "--topology",
            "flatbfly",
            "--grid",
            "3",
            "--seed",
            "9",
            "--stats",
            stats.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(20));
        (fs::read(&stats).unwrap(), fs::read(&trace).unwrap())
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let v: serde_json::Value = serde_json::from_slice(&first.0).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["verdict"], "UNSAT");
    assert_eq!(v["topology"], "flattened_butterfly");
    assert_eq!(v["grid"], 3);
    let csv = String::from_utf8(first.1).unwrap();
    assert!(csv.starts_with("cycle,kind,src,dst,fields\n"));
    assert!(csv.lines().nth(1).unwrap().contains(",AddClause,central,"));
}

#[test]
fn characterize_prints_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "f.cnf", "p cnf 4 3\n1 2 0\n1 3 0\n1 4 0\n");
    let csv = dir.path().join("c.csv");
    let out = satin(&[
        "characterize",
        f.to_str().unwrap(),
        "--percentiles",
        "0.5,1",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 variables, 3 clauses"));
    assert_eq!(
        fs::read_to_string(&csv).unwrap(),
        "percentile,clause_length,var_popularity\n0.5,2,1\n1,2,3\n"
    );
    let bad = satin(&["characterize", f.to_str().unwrap(), "--percentiles", "1.5"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn compare_over_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir, "a.cnf", SAT);
    write(&dir, "b.cnf", UNSAT);
    write(&dir, "notes.txt", "ignored");
    let json = dir.path().join("cmp.json");
    let out = satin(&[
        "compare",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("a.cnf") && text.contains("b.cnf") && text.contains("geomean"));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "f.cnf", SAT);
    assert_eq!(satin(&["solve", "/nonexistent.cnf"]).status.code(), Some(1));
    assert_eq!(
        satin(&["solve", f.to_str().unwrap(), "--grid", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        satin(&["solve", f.to_str().unwrap(), "--contexts", "3"])
            .status
            .code(),
        Some(1)
    );
    let g = write(&dir, "g.cnf", "p cnf 1 1\n1 x 0\n");
    assert_eq!(
        satin(&["solve", g.to_str().unwrap()]).status.code(),
        Some(1)
    );
}
