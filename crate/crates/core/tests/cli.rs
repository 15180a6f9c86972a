use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storage-risk"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("STORAGE_RISK_OUT")
        .output()
        .unwrap()
}

fn error_json(o: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim().lines().last().unwrap()).unwrap()
}

#[test]
fn deterministic_battery_solve_has_no_stochastic_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["solve", "--case", "bess", "--t-obs", "0", "--ns", "1", "--sigma", "0", "--t-f", "47"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("solve.json")).unwrap()).unwrap();
    for k in ["evpi", "vss", "vss_cvar"] {
        assert_eq!(report["metrics"][k].as_f64().unwrap().abs(), 0.0, "{k}");
    }
    assert!(report["details"]["audit_max_violation"].as_f64().unwrap() <= 1e-6);
    let ok: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(ok["status"], "ok");
}

#[test]
fn scenario_dump_reruns_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["scenarios", "--ns", "35", "--sigma", "20", "--seed", "7"];
    assert!(bin(&args, a.path()).status.success());
    assert!(bin(&args, b.path()).status.success());
    for f in ["scenarios.csv", "scenarios.json", "prices.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn frontier_writes_one_row_per_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(
        &["frontier", "--case", "ihs", "--t-f", "23", "--ns", "3", "--eps", "inf,5.8e6,5.75e6,5.7e6"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "inf");
    assert_eq!(text.lines().next().unwrap().split(',').count(), 10);
    let mut last = f64::INFINITY;
    for r in &rows {
        let eps: f64 = if r[0] == "inf" { f64::INFINITY } else { r[0].parse().unwrap() };
        assert!(eps <= last);
        last = eps;
        if r[1] == "optimal" {
            assert!(r[3].parse::<f64>().unwrap() <= eps + 1e-6 * eps.abs());
        }
    }
}

#[test]
fn failures_exit_with_machine_readable_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], i32, &str); 4] = [
        (&["solve", "--alpha", "2"], 2, "config_invalid"),
        (&["solve", "--bogus"], 2, "config_invalid"),
        (&["solve", "--prices", "/nonexistent/prices.csv"], 3, "data_missing"),
        (&["solve", "--t-f", "23", "--ns", "2", "--eps", "-1e12"], 4, "solver_failure"),
    ];
    for (args, code, kind) in cases {
        let o = bin(args, dir.path());
        assert_eq!(o.status.code(), Some(code), "{args:?}");
        let j = error_json(&o);
        assert_eq!(j["error"]["kind"], kind, "{args:?}");
        assert_eq!(j["error"]["exit_code"], code);
    }
}

#[test]
fn config_file_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n_s": 3, "sigma_obs": 5.0, "seed": 4, "t_f": 11}"#).unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_storage-risk"))
        .args(["scenarios", "--config", cfg.to_str().unwrap(), "--ns", "2"])
        .env("STORAGE_RISK_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["n_s"], 2);
    assert_eq!(m["config"]["sigma_obs"], 5.0);
    assert_eq!(m["config"]["seed"], 4);
    assert_eq!(m["seed"], 4);
}

#[test]
fn desk_scale_warning_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["scenarios", "--ns", "400"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = bin(&["metrics", "--t-f", "23", "--t-obs", "6", "--ns", "3", "--eps", "inf,-1000"], &first);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.join("manifest.json");
    let again = dir.path().join("again");
    let o = Command::new(env!("CARGO_BIN_EXE_storage-risk"))
        .args(["replay", manifest.to_str().unwrap(), "--check", "--out", again.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.csv", "metrics.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap());
    }

    let mut m: Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = "00".into();
    std::fs::write(&manifest, serde_json::to_vec(&m).unwrap()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_storage-risk"))
        .args(["replay", manifest.to_str().unwrap(), "--check", "--out", again.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(6));

    m["config"]["n_s"] = 4.into();
    std::fs::write(&manifest, serde_json::to_vec(&m).unwrap()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_storage-risk"))
        .args(["replay", manifest.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn rolling_writes_a_ledger_per_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["rolling", "--t-f", "47", "--ns", "3", "--eps", "inf,-1e9"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("rolling_summary.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("inf,optimal,"));
    assert!(rows[1].contains(",infeasible,"));
    assert!(dir.path().join("rolling_ledger_0.csv").exists());
    assert!(!dir.path().join("rolling_ledger_1.csv").exists());
}
