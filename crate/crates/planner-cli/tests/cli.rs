//! End-to-end tests of the `planner` binary: one-shot planning, the sweep /
//! validate round trip, error exit codes and output determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planner"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// `plan` on the motivation example finds the 11-flow optimum.
#[test]
fn plan_on_the_motivation_example_finds_eleven_flows() {
    let fig1 = fixture("fig1.csv");
    // N=6, gamma=3: m_percent 0.67 gives M = floor(0.67 * 18) = 12.
    let out = run(&[
        "plan",
        "--topology",
        fig1.to_str().unwrap(),
        "--capacity",
        "6",
        "--gamma",
        "3",
        "--distance",
        "hops",
        "--algo",
        "flowonly",
        "--m-percent",
        "0.67",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["metrics"]["flows"], 11);
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["metrics"]["cost"].as_u64().unwrap() <= 12, true);
}

/// A nonexistent topology file maps to the I/O exit code.
#[test]
fn missing_topology_file_exits_with_io_code() {
    let out = run(&[
        "plan",
        "--topology",
        "/nonexistent/nowhere.graphml",
        "--algo",
        "mapfirst",
    ]);
    assert_eq!(out.status.code(), Some(22));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

/// An unknown algorithm maps to the malformed-input exit code.
#[test]
fn unknown_algorithm_exits_with_malformed_input_code() {
    let fig1 = fixture("fig1.csv");
    let out = run(&[
        "plan",
        "--topology",
        fig1.to_str().unwrap(),
        "--distance",
        "hops",
        "--algo",
        "simulated-annealing",
    ]);
    assert_eq!(out.status.code(), Some(10));
}

/// `sweep` writes CSV + JSON and `validate` accepts the bundle.
#[test]
fn sweep_then_validate_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("results");
    let fig1 = fixture("fig1.csv");
    let out = run(&[
        "sweep",
        "--topology",
        fig1.to_str().unwrap(),
        "--capacity",
        "6",
        "--gamma",
        "3",
        "--distance",
        "hops",
        "--algo",
        "mapfirst",
        "--algo",
        "optimal",
        "--m-percent",
        "0.3",
        "--m-percent",
        "0.67",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "topology,algorithm,m_percent,flows,n_controllers,sc_delay,cc_delay,ratio,wall_time_ms,status,gap"
    );
    assert_eq!(lines.count(), 4, "2 algorithms x 2 budgets");

    let out = run(&["validate", prefix.with_extension("json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok: 4 plans revalidated"));
}

/// Corrupting a stored metric makes `validate` fail with the validation code.
#[test]
fn validate_rejects_a_tampered_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("results");
    let fig1 = fixture("fig1.csv");
    let out = run(&[
        "sweep",
        "--topology",
        fig1.to_str().unwrap(),
        "--capacity",
        "6",
        "--gamma",
        "3",
        "--distance",
        "hops",
        "--algo",
        "weightfirst",
        "--m-percent",
        "0.67",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let json_path = prefix.with_extension("json");
    let mut bundle: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let flows = bundle["rows"][0]["flows"].as_u64().unwrap();
    bundle["rows"][0]["flows"] = serde_json::json!(flows + 1);
    std::fs::write(&json_path, serde_json::to_string(&bundle).unwrap()).unwrap();

    let out = run(&["validate", json_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(21));
}

/// Identical invocations produce identical plans and metrics.
#[test]
fn repeated_runs_are_deterministic() {
    let fig1 = fixture("fig1.csv");
    let att = fixture("att.graphml");
    let args = [
        "plan",
        "--topology",
        att.to_str().unwrap(),
        "--algo",
        "mapfirst",
        "--m-percent",
        "0.4",
    ];
    let (a, b) = (stdout_json(&run(&args)), stdout_json(&run(&args)));
    assert_eq!(a["plan"], b["plan"]);
    assert_eq!(a["metrics"], b["metrics"]);

    for algo in ["optimal", "flowonly", "mapfirst", "weightfirst"] {
        let args = [
            "plan",
            "--topology",
            fig1.to_str().unwrap(),
            "--capacity",
            "6",
            "--gamma",
            "3",
            "--distance",
            "hops",
            "--algo",
            algo,
            "--m-percent",
            "0.67",
        ];
        let (a, b) = (stdout_json(&run(&args)), stdout_json(&run(&args)));
        assert_eq!(a["plan"], b["plan"], "algorithm {algo}");
    }
}

/// `compare` reports the strengthened root bound at or below the plain one.
#[test]
fn compare_orders_root_bounds() {
    let fig1 = fixture("fig1.csv");
    let out = run(&[
        "compare",
        "--topology",
        fig1.to_str().unwrap(),
        "--capacity",
        "6",
        "--gamma",
        "3",
        "--distance",
        "hops",
        "--m-percent",
        "0.67",
    ]);
    let v = stdout_json(&out);
    let cells = v.as_array().unwrap();
    assert_eq!(cells.len(), 2);
    let plain = cells.iter().find(|c| c["formulation"] == "plain").unwrap();
    let strong = cells
        .iter()
        .find(|c| c["formulation"] == "strengthened")
        .unwrap();
    let rb_plain = plain["root_bound"].as_f64().unwrap();
    let rb_strong = strong["root_bound"].as_f64().unwrap();
    assert!(rb_strong <= rb_plain + 1e-6);
    // Both exact solves agree on the optimum.
    let opt_plain = plain["optimum"].as_f64().unwrap();
    let opt_strong = strong["optimum"].as_f64().unwrap();
    assert!((opt_plain - opt_strong).abs() < 1e-6);
}
