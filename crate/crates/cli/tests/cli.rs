use std::path::Path;
use std::process::{Command, Output};

fn ran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ran"))
        .args(args)
        .output()
        .expect("run ran")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn generate_t1_is_the_tetrahedron() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("h.csv");
    let edges = dir.path().join("e.txt");
    let trace = dir.path().join("trace.txt");
    let out = ran(&[
        "generate",
        "--t",
        "1",
        "--seed",
        "5",
        "--hist",
        hist.to_str().unwrap(),
        "--out",
        edges.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "t=1 V=4 E=6 F=3 max_degree=3\n");
    assert_eq!(read(&hist), "k,count\n3,4\n");
    assert_eq!(read(&edges), "0 1\n1 2\n2 0\n0 3\n1 3\n2 3\n");
    assert_eq!(read(&trace), "0\n");
}

#[test]
fn generate_t3_histogram_is_deterministic_in_shape() {
    // Every run at t = 3 has degrees {3, 3, 4, 4, 5, 5}.
    for seed in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let hist = dir.path().join("h.csv");
        let seed = seed.to_string();
        let out = ran(&[
            "generate",
            "--t",
            "3",
            "--seed",
            &seed,
            "--hist",
            hist.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        assert_eq!(read(&hist), "k,count\n3,2\n4,2\n5,2\n");
    }
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let hist = dir.path().join(format!("h{run}.csv"));
        let edges = dir.path().join(format!("e{run}.txt"));
        let out = ran(&[
            "generate",
            "--t",
            "1000000",
            "--seed",
            "42",
            "--hist",
            hist.to_str().unwrap(),
            "--out",
            edges.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        outputs.push((
            stdout(&out),
            std::fs::read(&hist).unwrap(),
            std::fs::read(&edges).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0]
        .0
        .starts_with("t=1000000 V=1000003 E=3000003 F=2000001 "));
}

#[test]
fn limits_prints_exact_coefficients() {
    let out = ran(&["limits", "--kmax", "5"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "3,2/5\n4,1/5\n5,4/35\n");
}

#[test]
fn expect_float_and_exact() {
    let out = ran(&["expect", "--t", "1", "--kmax", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "k,t,N,b_k_times_t,e\n3,1,4,0.4,3.6\n");

    let out = ran(&["expect", "--t", "2", "--kmax", "4", "--exact"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "k,t,N,b_k_times_t,e\n3,2,1,4/5,1/5\n4,2,4,2/5,18/5\n"
    );
}

#[test]
fn expect_exact_beyond_cap_is_capacity_error() {
    let out = ran(&["expect", "--t", "1025", "--kmax", "10", "--exact"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn oracle_t2_against_recurrence() {
    let out = ran(&["oracle", "--t", "2"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "k,exact_num,exact_den,recurrence,discrepancy\n3,2,1,1,-1\n4,3,1,4,1\n"
    );
}

#[test]
fn oracle_beyond_cap_is_capacity_error() {
    let out = ran(&["oracle", "--t", "9"]);
    assert_eq!(code(&out), 3);
    assert!(out.stdout.is_empty());
}

#[test]
fn couple_exhaustive_and_sampled() {
    let out = ran(&["couple", "--t", "5", "--exhaustive"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["t"], 5);
    assert_eq!(doc["pairs_checked"], 18900);
    assert!(doc["max_difference"].as_u64().unwrap() <= 6);

    let out = ran(&["couple", "--t", "100", "--samples", "10000", "--seed", "2"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["pairs_checked"], 10000);
    assert!(doc["max_difference"].as_u64().unwrap() <= 6);
}

#[test]
fn couple_with_no_samples_is_empty_report() {
    let out = ran(&["couple", "--t", "3", "--samples", "0", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["pairs_checked"], 0);
    assert_eq!(doc["note"], "no samples");
}

#[test]
fn couple_exhaustive_beyond_cap_is_capacity_error() {
    assert_eq!(code(&ran(&["couple", "--t", "6", "--exhaustive"])), 3);
}

#[test]
fn couple_needs_a_mode() {
    assert_eq!(code(&ran(&["couple", "--t", "6"])), 1);
    assert_eq!(code(&ran(&["couple", "--t", "6", "--samples", "10"])), 1);
}

#[test]
fn simulate_t3_has_no_variance() {
    let out = ran(&["simulate", "--t", "3", "--replicates", "100", "--seed", "7"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let per_k = doc["per_k"].as_array().unwrap();
    assert_eq!(per_k.len(), 3);
    for entry in per_k {
        assert_eq!(entry["mean"], 2.0);
        assert_eq!(entry["stddev"], 0.0);
    }
}

#[test]
fn simulate_output_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut docs = Vec::new();
    for workers in ["1", "8"] {
        let path = dir.path().join(format!("sim{workers}.json"));
        let out = ran(&[
            "simulate",
            "--t",
            "2000",
            "--replicates",
            "64",
            "--seed",
            "11",
            "--workers",
            workers,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        docs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(docs[0], docs[1]);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(
        code(&ran(&[
            "simulate",
            "--t",
            "3",
            "--replicates",
            "0",
            "--seed",
            "1"
        ])),
        1
    );
    assert_eq!(code(&ran(&["generate", "--t", "3"])), 1);
    assert_eq!(code(&ran(&["bogus"])), 1);
    assert_eq!(code(&ran(&["limits", "--kmax", "2"])), 1);
    assert_eq!(code(&ran(&["verify", "--only", "11"])), 1);
    assert_eq!(code(&ran(&["--help"])), 0);
}

#[test]
fn unwritable_output_exits_2() {
    let out = ran(&[
        "generate",
        "--t",
        "10",
        "--seed",
        "1",
        "--out",
        "/nonexistent-dir/edges.txt",
    ]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn memory_budget_exceeded_exits_3() {
    let out = ran(&[
        "generate",
        "--t",
        "100000000",
        "--seed",
        "1",
        "--memory-budget-mb",
        "1",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn verify_quick_exit_code_matches_lines() {
    let out = ran(&["verify", "--quick", "--only", "1,2,4,5,7,8"]);
    let text = stdout(&out);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
        .collect();
    assert_eq!(lines.len(), 6, "{text}");
    let failed = lines.iter().any(|l| l.starts_with("[FAIL]"));
    assert_eq!(code(&out), if failed { 1 } else { 0 }, "{text}");
    assert!(!failed, "{text}");
}
