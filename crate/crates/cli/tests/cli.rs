use std::path::Path;
use std::process::{Command, Output};

use lossnet_cli::{execute, Command as Cmd, RunManifest};

fn lossnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lossnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bounds_on_eq52_reports_steady_upper() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossnet(&[
        "bounds",
        "--scenario",
        "eq52",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(dir.path(), "bounds.csv");
    assert!(csv.lines().next().unwrap().starts_with("# manifest: {"));
    let r = rows(&csv);
    assert_eq!(r.len(), 200);
    for row in &r {
        let steady: f64 = row[3].parse().unwrap();
        assert!((steady - 207.2727).abs() < 1e-3);
    }
}

#[test]
fn zero_horizon_gives_zero_upper() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = lossnet(&["bounds", "--horizon", "0", "--eps", "0.1", "--out", d]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for row in rows(&read(dir.path(), "bounds.csv")) {
        assert_eq!(row[0].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn eps_at_or_above_quarter_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for eps in ["0.3", "0.25"] {
        let out = lossnet(&[
            "bounds",
            "--eps",
            eps,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("eps must be < 0.25"));
    }
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossnet(&[
        "bounds",
        "--scenario",
        "nope.json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_mismatch_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let poly = dir.path().join("poly.json");
    std::fs::write(&poly, r#"{"D": [[1, 1], [1, -1]], "h": [60, 5]}"#).unwrap();
    let out = lossnet(&[
        "polytope",
        "--scenario",
        "s5",
        "--polytope",
        poly.to_str().unwrap(),
        "--runs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu_min/mu_max"));
}

#[test]
fn scenarios_lists_the_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossnet(&["scenarios", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = read(dir.path(), "scenarios.txt");
    for name in ["eq52", "s1", "s2", "s3", "s4", "s5"] {
        assert!(text.contains(&format!("{name}: ")), "{name}");
    }
    assert!(text.contains(
        "class 3: lambda = 60, service = exp(mu=0.3), reward = 0.75, allocations = [[0.55]]"
    ));
    assert!(text.contains(
        "class 4: lambda = 4, service = exp(mu=0.2), reward = 0.67, allocations = [[0.045]]"
    ));
    assert!(text.contains(
        "class 1: lambda = 100, service = exp(mu=0.1), reward = 1, allocations = [[1.0]]"
    ));
}

#[test]
fn table1_has_eleven_doubling_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossnet(&["table1", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = read(dir.path(), "table1.csv");
    assert!(csv.contains("scale,eps,beta,steady_error_pct,transient_error_pct"));
    let scales: Vec<u64> = rows(&csv).iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(scales, (0..11).map(|k| 1u64 << k).collect::<Vec<_>>());
    assert!(csv.contains("# power_law: "));
}

#[test]
fn compare_on_s4_shares_arrivals() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossnet(&[
        "compare",
        "--scenario",
        "s4",
        "--runs",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let hash = |name| {
        read(dir.path(), name)
            .lines()
            .find(|l| l.starts_with("# arrival_hash: "))
            .unwrap()
            .to_string()
    };
    assert_eq!(hash("trace_penalty.csv"), hash("trace_thinning.csv"));
}

#[test]
fn json_mirror_matches_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossnet(&[
        "simulate",
        "--scenario",
        "s1",
        "--scale",
        "5",
        "--runs",
        "4",
        "--grid",
        "20",
        "--json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "trace_penalty.json")).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 20);
    assert_eq!(doc["metadata"]["manifest"]["command"], "simulate");
    assert_eq!(doc["columns"][0], "t");
}

#[test]
fn rerun_from_csv_is_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = lossnet(&[
        "simulate",
        "--scenario",
        "s2",
        "--scale",
        "10",
        "--policy",
        "thinning",
        "--runs",
        "6",
        "--seed",
        "9",
        "--out",
        a.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let src = a.path().join("trace_thinning.csv");
    let out = lossnet(&[
        "rerun",
        "--manifest",
        src.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        read(a.path(), "trace_thinning.csv"),
        read(b.path(), "trace_thinning.csv")
    );
    assert_eq!(
        read(a.path(), "manifest.json"),
        read(b.path(), "manifest.json")
    );
}

#[test]
fn manifest_rejects_unknown_fields() {
    let mut v = serde_json::to_value(RunManifest::new(Cmd::Bounds)).unwrap();
    v["extra"] = serde_json::json!(1);
    assert!(RunManifest::from_json(&v.to_string()).is_err());
}

#[test]
fn manifest_round_trips_through_metadata() {
    let mut m = RunManifest::new(Cmd::Simulate);
    m.scenario = "s3".into();
    m.scale = 7.0;
    m.runs = 3;
    m.grid = 11;
    let m = m.resolve().unwrap();
    let outputs = execute(&m).unwrap();
    let line = outputs[0].content.lines().next().unwrap();
    let back = RunManifest::from_json(line.strip_prefix("# manifest: ").unwrap()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn multi_resource_penalty_needs_eps() {
    let mut sc = lossnet::scenarios::eq52();
    sc.capacity.push(50.0);
    for c in &mut sc.classes {
        c.allocations[0].push(0.05);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    std::fs::write(&path, sc.to_json()).unwrap();
    let d = dir.path().to_str().unwrap();
    let out = lossnet(&[
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--runs",
        "2",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = lossnet(&[
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--eps",
        "0.2",
        "--runs",
        "2",
        "--grid",
        "10",
        "--out",
        d,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(read(dir.path(), "trace_network-penalty.csv").contains("mean_util_2"));
}
