use std::path::Path;
use std::process::{Command, Output};

fn dbar(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbar"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{ \"exhaustion\": ").unwrap();
    let o = dbar(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn semantically_invalid_config_exits_2_and_names_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = serde_json::to_value(dbar_cli::presets::ex48b()).unwrap();
    cfg["grid"]["h"] = serde_json::json!(-1.0);
    cfg["solver"]["levels"] = serde_json::json!(0);
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let o = dbar(&["solve", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid.h"), "{err}");
    assert!(err.contains("solver.levels"), "{err}");
}

#[test]
fn config_and_preset_together_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbar(&["solve", "--preset", "ex48b", "--config", "x.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_writes_one_row_per_spacing() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbar(&["convergence", "--preset", "ex48b"], dir.path());
    // the S_h slope gate fails, so the run exits 1 but still writes its artifacts
    assert_eq!(o.status.code(), Some(1));
    let report = String::from_utf8(o.stdout).unwrap();
    let run_dir = Path::new(report.trim()).parent().unwrap();
    let csv = std::fs::read_to_string(run_dir.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,residual,Sh_error,residual_slope,Sh_slope");
    assert_eq!(lines.len(), 4);
    assert!(run_dir.join("meta.json").exists());
}

#[test]
fn passing_run_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbar(&["delta-test", "--preset", "ex48b"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
