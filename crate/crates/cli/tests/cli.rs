use std::path::Path;
use std::process::{Command, Output};

fn ofa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ofa"))
        .args(args)
        .env_remove("OFA_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV artifact, skipping the `#` metadata line and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn weights_of_shapley_at_three() {
    let text = stdout(&ofa(&["weights", "--semivalue", "beta:1:1", "--n", "3"]));
    let meta = text.lines().next().unwrap();
    assert!(meta.starts_with("# version="));
    assert!(meta.contains("args=weights --semivalue beta:1:1 --n 3"));
    let p: Vec<f64> = rows(&text).iter().map(|r| r[1].parse().unwrap()).collect();
    for (x, y) in p.iter().zip([1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0]) {
        assert!((x - y).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn estimate_writes_a_full_trace() {
    let text = stdout(&ofa(&[
        "estimate",
        "--estimator",
        "ofa_a",
        "--semivalue",
        "wb:0.5",
        "--game",
        "sou:64:4096:2024",
        "--budget",
        "2000",
        "--seed",
        "0",
    ]));
    assert!(text.lines().next().unwrap().contains("seed=0"));
    let r = rows(&text);
    let marks: std::collections::BTreeSet<&str> = r.iter().map(|row| row[0].as_str()).collect();
    assert_eq!(marks.len(), 100);
}

#[test]
fn estimate_is_reproducible() {
    let args = [
        "estimate",
        "--estimator",
        "wsl",
        "--semivalue",
        "beta:4:1",
        "--game",
        "sou:8:20:1",
        "--budget",
        "50",
    ];
    let a = stdout(&ofa(&[&args[..], &["--seed", "7"]].concat()));
    let b = stdout(&ofa(&[&args[..], &["--seed", "7"]].concat()));
    let c = stdout(&ofa(&[&args[..], &["--seed", "8"]].concat()));
    assert_eq!(a, b);
    assert_ne!(rows(&a), rows(&c));
}

#[test]
fn bound_example() {
    let text = stdout(&ofa(&[
        "bound", "--n", "24", "--u", "1", "--D", "0.6667", "--eps", "0.1", "--delta", "0.05",
    ]));
    let v: f64 = rows(&text)[0][5].parse().unwrap();
    assert!((v / 7.31e4 - 1.0).abs() < 2e-3, "{v}");
}

#[test]
fn exact_on_a_table_file() {
    // Two players, U(1) = 1, U(2) = 2, U(12) = 4: Shapley gives 1.5 and 2.5.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    std::fs::write(&path, "mask,utility\n0,0\n1,1\n2,2\n3,4\n").unwrap();
    let text = stdout(&ofa(&[
        "exact",
        "--game",
        &format!("table:@{}", path.display()),
        "--semivalue",
        "beta:1:1",
    ]));
    let phi: Vec<f64> = rows(&text).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(
        (phi[0] - 1.5).abs() < 1e-12 && (phi[1] - 2.5).abs() < 1e-12,
        "{phi:?}"
    );
}

#[test]
fn jsonl_output() {
    let text = stdout(&ofa(&[
        "weights",
        "--semivalue",
        "wb:0.5",
        "--n",
        "4",
        "--format",
        "jsonl",
    ]));
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines[0]["meta"]["version"].is_string());
    assert_eq!(lines.len(), 5);
    assert!((lines[1]["p"].as_f64().unwrap() - 0.125).abs() < 1e-15);
}

fn assert_error(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error: {kind}")), "{err}");
}

#[test]
fn errors_are_one_line() {
    assert_error(&ofa(&["weights", "--semivalue", "beta:1:1"]), 2, "usage: ");
    assert_error(
        &ofa(&[
            "estimate",
            "--estimator",
            "nope",
            "--semivalue",
            "wb:0.5",
            "--game",
            "sou:8:4:1",
            "--budget",
            "10",
        ]),
        2,
        "usage: ",
    );
    // Permutation sampling only estimates the Shapley value.
    assert_error(
        &ofa(&[
            "estimate",
            "--estimator",
            "permutation",
            "--semivalue",
            "wb:0.5",
            "--game",
            "sou:8:4:1",
            "--budget",
            "10",
        ]),
        1,
        "",
    );
}

#[test]
fn failed_runs_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "not a game").unwrap();
    let out = dir.path().join("exact.csv");
    let o = ofa(&[
        "exact",
        "--game",
        &format!("table:@{}", bad.display()),
        "--semivalue",
        "beta:1:1",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_error(&o, 1, "");
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ofa"))
        .args(["weights", "--semivalue", "beta:1:1", "--n", "5"])
        .env("OFA_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("weights.csv")).unwrap();
    assert_eq!(rows(&text).len(), 5);
}

#[test]
fn benchmark_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    std::fs::write(
        &cfg,
        r#"
game = "sou:8:20:3"
semivalues = ["beta:1:1", "wb:0.5"]
estimators = ["ofa_a", "permutation"]
budget_per_player = 40
checkpoints = 4
seeds = [1, 2]
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ofa(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--plots",
    ]);
    let listed = stdout(&o);
    assert!(listed.lines().count() >= 4);
    for f in listed.lines() {
        assert!(Path::new(f).exists());
    }
    let aucc = std::fs::read_to_string(out.join("aucc.csv")).unwrap();
    assert!(aucc.lines().next().unwrap().contains("seeds=1,2"));
    assert!(aucc.contains("permutation,wb:0.5"));
}
