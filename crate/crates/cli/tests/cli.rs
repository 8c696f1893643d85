use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kurasync_core::examples;
use kurasync_core::pipeline::io::save_network;
use serde_json::Value;

fn kurasync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kurasync"))
        .args(args)
        .env("KURASYNC_THREADS", "2")
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("error line on stderr");
    let v: Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {stderr}"));
    assert!(v["message"].is_string());
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn example_one_files(dir: &Path, inter_scale: f64, t_end: f64) -> (String, String) {
    let (net, part) = examples::example_one(1.0, 1.0, 1.0, inter_scale, inter_scale);
    let net_path = dir.join("net.json");
    save_network(&net_path, &net, Some(&part)).unwrap();
    let omega = examples::example_one_frequencies();
    let cfg = serde_json::json!({
        "frequencies": {"kind": "explicit", "omega": omega},
        "t_end": t_end,
        "burn_in": 0.0,
        "output_stride": 10,
        "seed": 3
    });
    let cfg_path = dir.join("config.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    (s(&net_path).to_string(), s(&cfg_path).to_string())
}

#[test]
fn check_partition_reports_exact_partition() {
    let dir = tempfile::tempdir().unwrap();
    let (net, _) = example_one_files(dir.path(), 1.0, 1.0);
    let dump = dir.path().join("dec");
    let out = kurasync(&["check-partition", "--network", &net, "--json", "--dump-decomposition", s(&dump)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["is_exact"], true);
    for m in ["B", "W", "B_tilde", "B_tilde_intra", "B_tilde_inter", "R1", "R3", "R4"] {
        assert!(dump.join(format!("{m}.csv")).exists(), "{m}");
    }
}

#[test]
fn certify_writes_certificate_and_tradeoff() {
    let dir = tempfile::tempdir().unwrap();
    let (net, cfg) = example_one_files(dir.path(), 1e-3, 1.0);
    let out_dir = dir.path().join("cert");
    let out = kurasync(&[
        "certify", "--network", &net, "--config", &cfg, "--tradeoff", "--gamma-grid", "0.1:100:5", "--out", s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["verdict"], "CERTIFIED");
    for key in ["gamma", "rho", "lambda2", "epsilon", "T_star", "kappa"] {
        assert!(cert[key].is_number(), "{key}");
    }
    let csv = fs::read_to_string(out_dir.join("tradeoff.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "gamma,epsilon_star");
    assert_eq!(lines.len(), 6);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (net, cfg) = example_one_files(dir.path(), 1.0, 2.0);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        let out = kurasync(&["simulate", "--network", &net, "--config", &cfg, "--out", s(o)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["trajectory.csv", "order_parameters.csv", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let traj = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,theta_0,"));
    assert_eq!(traj.lines().count(), 1 + 201);
    let order = fs::read_to_string(a.join("order_parameters.csv")).unwrap();
    assert!(order.starts_with("t,r_global,r_1,r_2,r_3"));
}

#[test]
fn sweep_practical_writes_sorted_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (net, cfg) = example_one_files(dir.path(), 1.0, 2.0);
    let out_dir = dir.path().join("sweep");
    let out = kurasync(&[
        "sweep-practical", "--network", &net, "--config", &cfg, "--multipliers", "4,1,2", "--out", s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "multiplier,asymptotic_distance");
    let cs: Vec<f64> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(cs, vec![1.0, 2.0, 4.0]);
}

#[test]
fn two_cluster_on_commuting_network() {
    let dir = tempfile::tempdir().unwrap();
    let (net, part) = examples::example_two(1.0, 1.0, 1.0);
    let net_path = dir.path().join("net.json");
    save_network(&net_path, &net, Some(&part)).unwrap();
    let cfg = serde_json::json!({
        "frequencies": {"kind": "explicit", "omega": examples::example_two_frequencies()},
        "t_end": 1.0,
        "burn_in": 0.0
    });
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("tc");
    let out = kurasync(&["two-cluster", "--network", s(&net_path), "--config", s(&cfg_path), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("two_cluster.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"], "CERTIFIED_COMMUTING");
}

#[test]
fn preprocess_builds_region_network() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    fs::create_dir(&raw).unwrap();
    // 6 subregions in 3 regions, a path 0-1-2 at region level
    let m = "0,1,1,0,0,0\n1,0,0,1,0,0\n1,0,0,0,1,1\n0,1,0,0,0,1\n0,0,1,0,0,0\n0,0,1,1,0,0\n";
    fs::write(raw.join("s1.csv"), m).unwrap();
    fs::write(raw.join("s2.csv"), m).unwrap();
    let map = dir.path().join("map.csv");
    fs::write(&map, "subregion,region\n0,0\n1,0\n2,1\n3,1\n4,2\n5,2\n").unwrap();
    let target = dir.path().join("out").join("net.csv");
    let out = kurasync(&["preprocess", "--raw", s(&raw), "--region-map", s(&map), "--out", s(&target)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["regions"], 3);
    let adj = fs::read_to_string(&target).unwrap();
    let max = adj
        .split([',', '\n'])
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert_eq!(max, 10.0);
}

#[test]
fn failures_emit_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let v = error_json(&kurasync(&["check-partition", "--network", s(&missing)]));
    assert_eq!(v["error"], "Io");

    let v = error_json(&kurasync(&["brain", "--scenario", "chaotic", "--seed", "1", "--out", s(dir.path())]));
    assert_eq!(v["error"], "InvalidConfig");

    let (net, _) = example_one_files(dir.path(), 1.0, 1.0);
    let bad_cfg = dir.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"frequencies": {"kind": "explicit", "omega": [1]}, "t_end": 0}"#).unwrap();
    let v = error_json(&kurasync(&["simulate", "--network", &net, "--config", s(&bad_cfg), "--out", s(dir.path())]));
    assert_eq!(v["error"], "InvalidConfig");

    // same frequency across an inter-cluster edge
    let flat = dir.path().join("flat.json");
    fs::write(
        &flat,
        r#"{"frequencies": {"kind": "explicit", "omega": [1,1,1,1,1,1,1,1]}, "t_end": 1, "burn_in": 0}"#,
    )
    .unwrap();
    let v = error_json(&kurasync(&["certify", "--network", &net, "--config", s(&flat), "--out", s(dir.path())]));
    assert_eq!(v["error"], "AssumptionViolated");

    let v = error_json(&kurasync(&["simulate", "--network", &net]));
    assert_eq!(v["error"], "Usage");

    let out = Command::new(env!("CARGO_BIN_EXE_kurasync"))
        .args(["example", "--id", "1", "--out", s(dir.path())])
        .env("KURASYNC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(error_json(&out)["error"], "InvalidConfig");
}

#[test]
fn brain_rejects_connectome_without_three_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let adj = dir.path().join("c.csv");
    fs::write(&adj, "0,1\n1,0\n").unwrap();
    let v = error_json(&kurasync(&[
        "brain", "--scenario", "homogeneous", "--connectome", s(&adj), "--seed", "1", "--out", s(dir.path()),
    ]));
    assert_eq!(v["error"], "InvalidNetwork");
}
