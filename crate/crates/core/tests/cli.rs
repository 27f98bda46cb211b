use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iwocs::harness::ExperimentConfig;

fn iwocs(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_iwocs"));
    cmd.args(args);
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.output().unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path)
        .unwrap()
        .headers()
        .unwrap()
        .iter()
        .map(str::to_owned)
        .collect()
}

#[test]
fn shipped_configs_load_and_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ExperimentConfig::load(&path).unwrap();
            cfg.validate()
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn validate_map_reports_shipped_geometry() {
    let out = iwocs(&["validate-map"], None);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["shortest_path"], 5);
    assert_eq!(report["width"], 6);
    assert_eq!(report["height"], 6);
    assert_eq!(report["wind_zones"], 12);
}

#[test]
fn solve_vi_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = iwocs(&["solve", "--algo", "vi"], Some(tmp.path()));
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let values = rows(&tmp.path().join("value.csv"));
    assert_eq!(values.len(), 36);
    let v0: f64 = values[0][1].parse().unwrap();
    // the default family starts at alpha = 0, where the walk is deterministic
    let expected = -(1.0 - 0.95f64.powi(5)) / 0.05;
    assert!((v0 - expected).abs() < 1e-2, "{v0}");
    assert_eq!(
        header(&tmp.path().join("q.csv")),
        ["state", "q_0", "q_1", "q_2", "q_3"]
    );
    assert_eq!(header(&tmp.path().join("policy.csv")), ["state", "action"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["command"], "solve");
}

#[test]
fn compare_writes_traces_and_small_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("windy_walk_compare.json");
    let out = iwocs(
        &["compare", "--config", cfg.to_str().unwrap()],
        Some(tmp.path()),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("terminal gap"));
    assert_eq!(
        header(&tmp.path().join("iwocs_trace.csv")),
        [
            "iteration",
            "param_0",
            "adversarial_value",
            "candidate_value",
            "gap",
            "status"
        ]
    );
    let trace = rows(&tmp.path().join("iwocs_trace.csv"));
    assert_eq!(&trace.last().unwrap()[5], "converged");
    let compare = rows(&tmp.path().join("compare.csv"));
    assert!(compare.iter().any(|r| &r[0] == "rvi") && compare.iter().any(|r| &r[0] == "iwocs"));
    let last_iwocs = compare.iter().rev().find(|r| &r[0] == "iwocs").unwrap();
    let err: f64 = last_iwocs[3].parse().unwrap();
    assert!(err <= 1e-2);
}

#[test]
fn cmaes_solve_writes_history() {
    let tmp = tempfile::tempdir().unwrap();
    let out = iwocs(
        &[
            "solve",
            "--searcher",
            "cmaes",
            "--evaluator",
            "mc",
            "--seed",
            "5",
        ],
        Some(tmp.path()),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let history = tmp.path().join("cmaes_history.csv");
    assert_eq!(
        header(&history),
        [
            "iteration",
            "generation",
            "best_value_so_far",
            "mean_value",
            "step_size"
        ]
    );
    assert!(rows(&history).len() >= 6);
}

#[test]
fn bad_input_exits_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"solver": {"vi_toll": 0.1}}"#).unwrap();
    let out = iwocs(
        &["solve", "--config", cfg.to_str().unwrap()],
        Some(tmp.path()),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vi_toll"));

    let map = tmp.path().join("map.txt");
    std::fs::write(&map, "S..\n.#.\n").unwrap();
    let out = iwocs(&["validate-map", "--map", map.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));

    let out = iwocs(&["solve", "--algo", "nope"], None);
    assert_eq!(out.status.code(), Some(2));
}
