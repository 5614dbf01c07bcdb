use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dollarwalk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dollarwalk"))
        .args(args)
        .current_dir(dir)
        .env_remove("CI")
        .env_remove("DOLLARWALK_ENUM_CAP")
        .output()
        .expect("spawn dollarwalk")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn generate_graph_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&dollarwalk(
        &["generate-graph", "--graph", "star:4"],
        dir.path(),
    ));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["n"], 4);
    assert_eq!(v["edges"].as_array().unwrap().len(), 3);

    // Round trip through a file.
    let path = dir.path().join("g.json");
    fs::write(&path, &out).unwrap();
    let again = stdout(&dollarwalk(
        &["generate-graph", "--graph", path.to_str().unwrap()],
        dir.path(),
    ));
    assert_eq!(again, out);
}

#[test]
fn exact_model1_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&dollarwalk(
        &[
            "exact", "--model", "1", "--n", "3", "--m", "2", "--d-max", "3",
        ],
        dir.path(),
    ));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "d,finite_N_marginal,limit_curve");
    assert!(lines[1].starts_with("0,0.5,"));
    assert!(lines[3].starts_with("2,0.16666"));
    // Beyond M the finite marginal is zero.
    assert!(lines[4].starts_with("3,0,"));
}

#[test]
fn exact_model2_star_center() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&dollarwalk(
        &[
            "exact", "--model", "2", "--graph", "star:4", "--vertex", "center", "--m", "3",
        ],
        dir.path(),
    ));
    let probs: Vec<f64> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs, vec![0.125, 0.375, 0.375, 0.125]);
}

#[test]
fn oracle_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dollarwalk(
        &[
            "oracle-check",
            "--model",
            "2",
            "--graph",
            "cycle:4",
            "--m",
            "1",
        ],
        dir.path(),
    );
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["period"], 2);
    assert_eq!(report["max_db_violation_exact"], "0");

    let capped = Command::new(env!("CARGO_BIN_EXE_dollarwalk"))
        .args([
            "oracle-check",
            "--model",
            "1",
            "--graph",
            "complete:4",
            "--m",
            "4",
        ])
        .env("DOLLARWALK_ENUM_CAP", "10")
        .output()
        .unwrap();
    assert!(!capped.status.success());
    assert!(String::from_utf8_lossy(&capped.stderr).contains("10"));
}

#[test]
fn simulate_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = dollarwalk(
        &[
            "simulate", "--model", "1", "--graph", "cycle:6", "--init", "equal:3", "--steps",
            "1800", "--seed", "9", "--out", "run",
        ],
        dir.path(),
    );
    stdout(&o);
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("d,count,empirical_probability\n"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["burn_in"], 10 * 6 * 18);
    assert_eq!(meta["stride"], 6 * 18);
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["pooled"], true);
    assert_eq!(meta["samples"], 17 * 6);
    assert_eq!(meta["estimator"], "snapshot");
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        stdout(&dollarwalk(
            &[
                "figure",
                "--model",
                "2",
                "--graph",
                "er:20:0.3:4",
                "--init",
                "all-at:2",
                "--total",
                "40",
                "--steps",
                "50000",
                "--replicas",
                "2",
                "--seed",
                "77",
                "--out",
                out,
            ],
            dir.path(),
        ));
        (
            fs::read(dir.path().join(format!("{out}.csv"))).unwrap(),
            fs::read(dir.path().join(format!("{out}.json"))).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn seed_required_under_ci() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--model",
        "1",
        "--graph",
        "complete:3",
        "--steps",
        "10",
        "--out",
        "x",
    ];
    let o = Command::new(env!("CARGO_BIN_EXE_dollarwalk"))
        .args(args)
        .current_dir(dir.path())
        .env("CI", "true")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));

    // Outside CI a seed is drawn and echoed.
    stdout(&dollarwalk(&args, dir.path()));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("x.json")).unwrap()).unwrap();
    assert!(meta["seed"].is_u64());
}

#[test]
fn rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["generate-graph", "--graph", "grid:0x3"],
        vec!["exact", "--model", "2", "--n", "4", "--m", "3"],
        vec![
            "exact", "--model", "1", "--graph", "cycle:4", "--vertex", "center", "--m", "3",
        ],
        vec![
            "simulate", "--model", "1", "--graph", "star:4", "--vertex", "7", "--steps", "5",
            "--seed", "1", "--out", "y",
        ],
        vec![
            "simulate", "--model", "3", "--graph", "star:4", "--steps", "5", "--seed", "1",
            "--out", "y",
        ],
    ] {
        assert!(!dollarwalk(&args, dir.path()).status.success(), "{args:?}");
    }
}
