use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chemokin::io::read_snapshot;

const BIN: &str = env!("CARGO_BIN_EXE_chemokin");

fn chemokin(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("CHEMOKIN_THREADS").output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn small_kinetic(out: &Path) -> String {
    format!(
        r#"{{
  "solver": "kinetic",
  "grid": {{ "extent": [2.0], "cells": [32] }},
  "velocity": {{ "nodes_per_axis": 8 }},
  "species": [
    {{ "psi": 1.0, "theta": {{ "kind": "tanh", "amp": 0.5, "sigma": 1.0 }} }},
    {{ "psi": 0.5 }}
  ],
  "eps": 0.5,
  "dt": 0.01,
  "t_end": 0.1,
  "init": {{ "kind": "gaussian-bump", "center": [1.0], "width": 0.3, "mass": 1.0 }},
  "output": {{ "directory": {:?}, "snapshot_stride": 5 }}
}}"#,
        out.to_string_lossy()
    )
}

#[test]
fn validate_kernels_passes() {
    let out = chemokin(&["validate-kernels"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,dim,p,t,computed,reference,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 20);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn simulate_writes_timeseries_snapshots_and_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &small_kinetic(&out));
    let res = chemokin(&["simulate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let ts = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 1 + 3);
    assert!(ts.starts_with("time,mass1,mass2,"));
    let snap = read_snapshot(&out.join("snapshot_00002.ckin")).unwrap();
    assert_eq!((snap.dim, snap.cells.clone(), snap.velocity_nodes), (1, vec![32], 8));
    assert_eq!(snap.payload.len(), 2 * 32 * 8);
    assert!((snap.time - 0.1).abs() < 1e-12);
    assert!(out.join("bounds.csv").exists());
    assert!(String::from_utf8(res.stdout).unwrap().contains("PASS l1_drift_1"));
}

#[test]
fn macro_snapshot_records_zero_velocity_nodes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let body = small_kinetic(&out).replace("\"kinetic\"", "\"macro\"").replace("\"eps\": 0.5,", "");
    let cfg = write_config(tmp.path(), &body);
    let res = chemokin(&["simulate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let snap = read_snapshot(&out.join("snapshot_00000.ckin")).unwrap();
    assert_eq!(snap.velocity_nodes, 0);
    assert_eq!(snap.eps, 0.0);
    assert_eq!(snap.payload.len(), 3 * 32);
}

#[test]
fn kinetic_snapshot_restarts_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let cfg = write_config(tmp.path(), &small_kinetic(&first));
    assert_eq!(chemokin(&["simulate", "--config", &cfg]).status.code(), Some(0));
    let snap = first.join("snapshot_00002.ckin");
    let second = tmp.path().join("second");
    let body = small_kinetic(&second).replace(
        r#"{ "kind": "gaussian-bump", "center": [1.0], "width": 0.3, "mass": 1.0 }"#,
        &format!(r#"{{ "kind": "file", "path": {:?} }}"#, snap.to_string_lossy()),
    );
    let cfg = write_config(tmp.path(), &body);
    let res = chemokin(&["simulate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let a = read_snapshot(&snap).unwrap();
    let b = read_snapshot(&second.join("snapshot_00000.ckin")).unwrap();
    assert_eq!(a.payload, b.payload);
}

#[test]
fn config_errors_exit_two_with_pointer_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cases = [
        (small_kinetic(&out).replace("\"amp\": 0.5", "\"amp\": 1.0"), "(H1)"),
        (small_kinetic(&out).replace("\"eps\": 0.5", "\"eps\": 0.0"), "macro"),
        (small_kinetic(&out).replace("\"dt\"", "\"dtt\""), "dtt"),
        ("{ not json".to_string(), "error"),
    ];
    for (body, needle) in cases {
        let cfg = write_config(tmp.path(), &body);
        let res = chemokin(&["simulate", "--config", &cfg]);
        assert_eq!(res.status.code(), Some(2));
        let err = String::from_utf8(res.stderr).unwrap();
        assert!(err.contains(needle), "{err}");
        assert!(res.stdout.is_empty());
    }
    let res = chemokin(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn cfl_violation_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let body = small_kinetic(&out)
        .replace("\"kinetic\"", "\"macro\"")
        .replace("\"eps\": 0.5,", "")
        .replace("\"sigma\": 1.0", "\"sigma\": 0.001")
        .replace("\"mass\": 1.0", "\"mass\": 50.0")
        .replace("\"dt\": 0.01", "\"dt\": 0.5")
        .replace("\"t_end\": 0.1", "\"t_end\": 1.0");
    let cfg = write_config(tmp.path(), &body);
    let res = chemokin(&["simulate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8(res.stderr).unwrap().contains("admissible"));
}

#[test]
fn sweep_prints_csv_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let body = small_kinetic(&out)
        .replace("\"kinetic\"", "\"sweep\"")
        .replace("\"eps\": 0.5", "\"eps\": [0.5, 0.25, 0.125]");
    let cfg = write_config(tmp.path(), &body);
    let res = chemokin(&["--threads", "2", "sweep", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "eps,err_l1_rho1,err_l1_rho2,err_l2_rho1,err_l2_rho2,r_l2_1,r_l2_2");
    assert_eq!(lines.len(), 5);
    let summary: serde_json::Value = serde_json::from_str(lines[4]).unwrap();
    assert!(summary["fitted_order"].as_f64().unwrap().is_finite());
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 4);
}

#[test]
fn thread_flag_beats_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_kinetic(&tmp.path().join("run")));
    let bad_env = Command::new(BIN)
        .args(["info", "--config", &cfg])
        .env("CHEMOKIN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
    let flag_wins = Command::new(BIN)
        .args(["--threads", "1", "info", "--config", &cfg])
        .env("CHEMOKIN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(flag_wins.status.code(), Some(0));
    let text = String::from_utf8(flag_wins.stdout).unwrap();
    assert!(text.contains("|V| = 2"));
    assert!(text.contains("dt/eps^2"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(chemokin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(chemokin(&["--help"]).status.code(), Some(0));
}
