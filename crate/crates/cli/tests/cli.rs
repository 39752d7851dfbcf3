use std::path::Path;
use std::process::{Command, Output};

fn lsbec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsbec"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const MINIMAL: &str =
    r#"{"nu": 1, "gamma": 5, "beta": 1, "rho": 1, "experiment": "bec", "sizes": [200], "R": 4, "seed": 7}"#;

#[test]
fn minimal_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    let o = lsbec(&["bec", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.csv", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "bec");
    assert_eq!(manifest["config"]["seed"], 7);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("N,L,statistic,value,stderr,R"));
}

#[test]
fn invalid_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (extra, key) in [("\"eta\": 3", "eta"), ("\"c2\": 2", "c2"), ("\"temperature\": 1", "temperature")] {
        let body = MINIMAL.replace("\"seed\": 7", &format!("\"seed\": 7, {extra}"));
        let cfg = write_config(dir.path(), &body);
        let o = lsbec(&["bec", "--config", &cfg], &out);
        assert_eq!(o.status.code(), Some(2), "{key}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(key), "{key}");
    }
}

#[test]
fn mismatched_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let o = lsbec(&["gap", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_spectrum_request_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--nu", "1", "--gamma", "5", "--beta", "1", "--rho", "1", "--levels", "50000000"];
    let o = lsbec(&args, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("[200]", "[100, 400]"));
    let mut bodies = Vec::new();
    for (i, threads) in ["1", "1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = lsbec(&["bec", "--config", &cfg, "--threads", threads], &out);
        assert!(o.status.success());
        bodies.push(std::fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
}

#[test]
fn spectrum_csv_lists_sorted_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args =
        ["spectrum", "--nu", "1", "--gamma", "5", "--beta", "1", "--rho", "1", "--length", "50", "--levels", "20"];
    let o = lsbec(&args, &out);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("realization_id,j,E_j"));
    let levels: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(levels.len(), 20);
    assert!(levels.windows(2).all(|w| w[0] < w[1]));
    assert!(levels[0] >= std::f64::consts::PI.powi(2) / 2500.0);
}

#[test]
fn lifshitz_writes_curve_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = [
        "lifshitz", "--nu", "1", "--gamma", "5", "--beta", "1", "--rho", "1", "--length", "500", "-R", "8",
    ];
    let o = lsbec(&args, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert!(fit["slope"].as_f64().unwrap() > 0.0);
    let ids = std::fs::read_to_string(out.join("ids.csv")).unwrap();
    assert!(ids.starts_with("E,mean,stderr,n_realizations"));
}
