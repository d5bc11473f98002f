use std::fs;
use std::path::Path;

use sparse_ica::cli::{main_with_args, METRICS_HEADER, SUMMARY_HEADER};

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["sparse-ica"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// CSV rows without the header and the wall-clock column.
fn numeric_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let skip = header.iter().position(|h| *h == "runtime_ms");
    lines
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, v)| v.to_string())
                .collect()
        })
        .collect()
}

#[test]
fn simulate_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(run(&["simulate", "--n", "4", "--samples", "300", "--seed", "5", "--out", p(&data)]), 0);
    for f in ["X.csv", "S.csv", "truth.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let x = fs::read_to_string(data.join("X.csv")).unwrap();
    assert_eq!(x.lines().count(), 300);

    let out = dir.path().join("fit");
    let code = run(&[
        "run",
        "--data",
        p(&data),
        "--method",
        "sparseica-likelihood",
        "--restarts",
        "4",
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), METRICS_HEADER);
    let row: Vec<&str> = metrics.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "sparseica-likelihood");
    assert_eq!(row.last().copied(), Some("ok"));
    let mcc: f64 = row[7].parse().unwrap();
    assert!(mcc > 0.9, "mcc {mcc}");
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["kind"], "solver");
}

#[test]
fn run_without_data_and_fastica() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ica");
    let code = run(&[
        "run",
        "--method",
        "fastica",
        "--n",
        "3",
        "--samples",
        "2000",
        "--gaussian-ratio",
        "0",
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0);
    let rows = numeric_rows(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 1);
    let mcc: f64 = rows[0][7].parse().unwrap();
    assert!(mcc > 0.9);
}

#[test]
fn sweep_writes_long_format_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let code = run(&[
        "sweep",
        "--axis",
        "gaussian-ratio",
        "--grid",
        "0,1",
        "--trials",
        "2",
        "--n",
        "3",
        "--samples",
        "400",
        "--restarts",
        "3",
        "--methods",
        "sparseica-likelihood,fastica",
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0);
    let rows = numeric_rows(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 2 * 2 * 2);
    let hashes: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[9].as_str()).collect();
    assert!(hashes.len() >= 2 && hashes.iter().all(|h| h.len() == 64));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER);
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
}

#[test]
fn reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let code = run(&[
            "sweep", "--axis", "sample-size", "--grid", "300", "--trials", "2", "--n", "4", "--restarts", "3",
            "--seed", "9", "--out", p(&out),
        ]);
        assert_eq!(code, 0);
        let sim = dir.path().join(format!("s{k}"));
        assert_eq!(run(&["simulate", "--n", "4", "--seed", "9", "--out", p(&sim)]), 0);
        outputs.push((
            numeric_rows(&out.join("metrics.csv")),
            fs::read(sim.join("X.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn verify_reports_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("xi1.csv");
    fs::write(&m, "1,0,0\n1,1,0\n1,0,1\n").unwrap();
    let out = dir.path().join("v").join("report.json");
    assert_eq!(run(&["verify", p(&m), "--out", p(&out)]), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["assumption1"], true);
    assert_eq!(report["assumption2"], true);
    assert_eq!(report["zheng_a4"], false);
    assert_eq!(report["zheng_a5"], false);
    assert_eq!(report["mec_singleton"], true);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(run(&["run", "--method", "nope", "--out", p(&out)]), 2);
    assert_eq!(run(&["simulate", "--samples", "1", "--out", p(&out)]), 2);
    assert_eq!(run(&["sweep", "--axis", "sample-size", "--grid", "", "--out", p(&out)]), 2);
    let missing = dir.path().join("missing");
    assert_eq!(run(&["run", "--method", "fastica", "--data", p(&missing), "--out", p(&out)]), 2);
    let m = dir.path().join("rect.csv");
    fs::write(&m, "1,0\n").unwrap();
    assert_eq!(run(&["verify", p(&m)]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
}
