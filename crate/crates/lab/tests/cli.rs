use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn shrinkerlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinkerlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn spectrum_run_writes_a_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = spectrum\ncurve1 = circle(1.4142135623730951)\nm = 64\n",
    );
    let out = dir.path().join("out");
    let o = shrinkerlab(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["scenario"], "spectrum");

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "shrinkerlab");
    assert_eq!(manifest["scenario"], "spectrum");
    assert_eq!(manifest["configHash"].as_str().unwrap().len(), 64);
    assert!(manifest["versions"]["shrinkerlab-core"].is_string());
    assert_eq!(manifest["results"], summary);
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["summary.json", "trace.csv"]);
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        let digest: String = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(f["sha256"].as_str().unwrap(), digest);
    }
}

#[test]
fn command_line_overrides_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = simulate\npicture = rmcf\ncurve1 = ellipse(1.5, 1.3)\nm = 64\ntau_end = 0.2\n",
    );
    let out = dir.path().join("out");
    let o = shrinkerlab(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--m",
        "96",
        "--tau-end",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["m"], "96");
    assert_eq!(manifest["config"]["tau_end"], "0.1");
    let frame = fs::read_to_string(out.join("frames/curve1_00000.csv")).unwrap();
    assert_eq!(frame.lines().count(), 1 + 96);
}

#[test]
fn invalid_config_exits_with_one_and_names_the_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = rate\ncurve1 = circle(-1)\nm = 63\n");
    let o = shrinkerlab(&[
        "rate",
        "--config",
        &cfg,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for field in ["curve1", "m", "tau_end"] {
        assert!(err.contains(field), "{field} missing from: {err}");
    }
}

#[test]
fn scenario_mismatch_and_missing_file_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = spectrum\ncurve1 = circle(1)\n");
    let o = shrinkerlab(&["rate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario"));

    let missing = dir.path().join("absent.cfg");
    let o = shrinkerlab(&["spectrum", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.cfg"));
}

#[test]
fn unknown_scenario_is_rejected_by_the_parser() {
    let o = shrinkerlab(&["warp", "--config", "x.cfg"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("warp"));
}

#[test]
fn non_convex_experiment_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = rate\ncurve1 = fourier(1.4, 3:0.3:0)\nm = 64\ntau_end = 1\n",
    );
    let o = shrinkerlab(&[
        "rate",
        "--config",
        &cfg,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("convex"), "{}", stderr(&o));
}
