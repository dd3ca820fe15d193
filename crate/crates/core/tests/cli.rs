use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use recirc_core::config::RunConfig;

fn recirc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recirc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut doc: serde_json::Value = serde_json::from_str(include_str!("../presets/zero_data.json")).unwrap();
    edit(&mut doc);
    let path = dir.join(name);
    fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# recirc "));
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn validate_preset_and_file() {
    let o = recirc(&["validate", "--preset", "four-pump"]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["valid"], true);

    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.json", |_| {});
    assert_eq!(code(&recirc(&["validate", "--config", &good])), 0);
}

#[test]
fn validate_lists_every_problem_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", |d| {
        d["fluid"]["nu"] = serde_json::json!(-1.0);
        d["pumps"] = serde_json::json!([{
            "injector": {"side": "bottom", "start": 0.25, "end": 0.5},
            "collector": {"side": "bottom", "start": 0.375, "end": 0.625},
            "profile": {"kind": "flat"},
            "schedule": [[0.0, 1.0], [1.0, 1.0]]
        }]);
    });
    let o = recirc(&["validate", "--config", &bad]);
    assert_eq!(code(&o), 2);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["valid"], false);
    let errors = report["errors"].as_array().unwrap();
    let text: Vec<String> = errors.iter().map(|e| format!("{} {}", e["path"], e["message"])).collect();
    assert!(text.iter().any(|t| t.contains("fluid.nu")), "{text:?}");
    assert!(text.iter().any(|t| t.contains("g(0) must be 0")), "{text:?}");
    assert!(text.iter().any(|t| t.contains("conflict")), "{text:?}");
}

#[test]
fn missing_or_malformed_config_is_a_config_error() {
    assert_eq!(code(&recirc(&["simulate"])), 2);
    assert_eq!(code(&recirc(&["simulate", "--config", "/nonexistent/run.json"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ \"domain\": ").unwrap();
    assert_eq!(code(&recirc(&["validate", "--config", path.to_str().unwrap()])), 2);
    assert_eq!(code(&recirc(&["frobnicate"])), 2);
}

#[test]
fn simulate_zero_data_is_null_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = recirc(&["simulate", "--preset", "zero-data", "--quiet", "--output-dir", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stderr.is_empty());
        out
    };
    let a = run("a");
    let b = run("b");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert!(summary["max_velocity_l2"].as_f64().unwrap() <= 1e-12);
    let hash = RunConfig::from_json(include_str!("../presets/zero_data.json")).unwrap().hash();
    assert_eq!(summary["config_hash"], hash.as_str());

    for file in ["trajectory.csv", "ledger.csv", "snapshots/step_000000.vtk", "snapshots/step_000100.vtk"] {
        let x = fs::read(a.join(file)).unwrap();
        assert_eq!(x, fs::read(b.join(file)).unwrap(), "{file} differs between runs");
        let first = String::from_utf8_lossy(&x).lines().take(2).collect::<Vec<_>>().join("\n");
        assert!(first.contains(&format!("config={hash}")), "{file}: {first}");
    }
    let (header, rows) = csv_rows(&a.join("trajectory.csv"));
    assert_eq!(&header[..3], ["t", "velocity_l2", "newton_iterations"]);
    assert_eq!(rows.len(), 101);
}

#[test]
fn simulate_failure_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "blowup.json", |d| {
        d["mesh"] = serde_json::json!({"nx": 4, "ny": 4});
        d["galerkin"]["modes"] = serde_json::json!(5);
        d["initial"] = serde_json::json!({"kind": "vortex", "amplitude": 1000.0});
        d["time"] = serde_json::json!({"T": 1.0, "dt": 0.5, "scheme": "explicit-rk4"});
    });
    let out = dir.path().join("out");
    let o = recirc(&["simulate", "--config", &cfg, "--quiet", "--output-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "failed");
    assert!(summary["error"].as_str().unwrap().contains("t="));
    assert!(out.join("trajectory.csv").exists());
}

#[test]
fn eigen_writes_small_rayleigh_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eig.json", |d| d["mesh"] = serde_json::json!({"nx": 12, "ny": 12}));
    let out = dir.path().join("out");
    let o = recirc(&["eigen", "--config", &cfg, "--modes", "10", "--quiet", "--output-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&out.join("eigenvalues.csv"));
    assert_eq!(header, ["index", "eigenvalue", "rayleigh_residual", "rayleigh_quotient"]);
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert!(r[2] <= 1e-8);
        assert!((r[1] - r[3]).abs() <= 1e-8 * r[1]);
    }
    assert!(rows.windows(2).all(|w| w[0][1] <= w[1][1]));
    assert!(out.join("basis.csv").exists());
}

#[test]
fn lift_samples_have_zero_net_flux() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o =
        recirc(&["lift", "--preset", "four-pump", "--samples", "4", "--quiet", "--output-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&out.join("lifting.csv"));
    assert_eq!(header.len(), 8);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[1].abs() < 1e-12));
    assert!(rows[0][2] == 0.0 && rows[4][2] > 0.0);
    assert!(out.join("lifting.vtk").exists());
}

#[test]
fn study_modes_error_shrinks_with_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(include_str!("../presets/vortex_decay.json")).unwrap();
    doc["mesh"] = serde_json::json!({"nx": 8, "ny": 8});
    doc["time"]["T"] = serde_json::json!(0.2);
    let cfg = dir.path().join("modes.json");
    fs::write(&cfg, doc.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = recirc(&[
        "study",
        "modes",
        "--modes",
        "2,4,8,16",
        "--reference",
        "32",
        "--config",
        cfg.to_str().unwrap(),
        "--quiet",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&out.join("study_modes.csv"));
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [2.0, 4.0, 8.0, 16.0]);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]), "{rows:?}");
}
