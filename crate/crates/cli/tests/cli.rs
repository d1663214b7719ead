use std::process::Command;

fn alarmsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alarmsim"))
}

#[test]
fn selftest_passes() {
    let out = alarmsim().arg("selftest").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("ok ")), "{text}");
}

#[test]
fn simulate_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    std::fs::write(&cfg, "n_subnets = 6\nn_channels = 2\neta_per_m = 0.1\ntx_threshold = 0.05\n").unwrap();
    let out_dir = dir.path().join("out");
    let status = alarmsim()
        .args(["simulate", "--policy", "mapra", "--runs", "3", "--slots", "200", "--seed", "9"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["policy"], "mapra");
    assert_eq!(summary["runs"].as_array().unwrap().len(), 3);
    assert!(out_dir.join("runs.csv").exists());
    assert!(out_dir.join("timing.json").exists());
}

#[test]
fn sweep_emits_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = alarmsim()
        .args(["sweep", "--axis", "n_channels", "--values", "1", "2", "--runs", "2", "--slots", "100"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(csv.starts_with("axis_value,policy,mean,stderr,runs"));
}

#[test]
fn analyze_stationary_table() {
    let out = alarmsim()
        .args(["analyze", "--ps", "0.5", "--deadline", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0.5,0,0.5,0.5,"));
    assert!(rows[2].starts_with("0.5,1,0.75,0.25,"));
}

#[test]
fn analyze_by_age() {
    let out = alarmsim()
        .args(["analyze", "--ps", "0.2", "0.5", "--deadline", "1", "--by-age"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(&fields[..2], &["age1", "1"]);
    assert!((fields[2].parse::<f64>().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn invalid_input_fails_with_named_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_channels = 0\n").unwrap();
    let out = alarmsim().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_channels"));

    let out = alarmsim()
        .args(["sweep", "--axis", "speed", "--values", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn default_config_round_trips() {
    let out = alarmsim().arg("config").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("default.toml");
    std::fs::write(&cfg, &text).unwrap();
    let status = alarmsim()
        .args(["simulate", "--runs", "1", "--slots", "50", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(status.success());
}
