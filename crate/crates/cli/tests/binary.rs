//! Exit status, standard output and structured errors of the command-line binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn capillary_sw(args: &[&str], root: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capillary-sw"))
        .args(args)
        .env("CAPILLARY_SW_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("capillary-sw-bin-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn equilibrium_prints_the_profile_csv() {
    let root = scratch("eq");
    let out = capillary_sw(&["equilibrium", "--n", "16", "-o", "eq"], &root);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "xi,h,h1,h2,h3,h4,ms");
    assert_eq!(text.lines().count(), 18);
    assert_eq!(std::fs::read_to_string(root.join("eq/equilibrium.csv")).unwrap(), text);
    assert!(root.join("eq/manifest.json").exists());
}

#[test]
fn configuration_errors_exit_with_status_two_and_name_the_field() {
    let root = scratch("bad");
    for (args, field) in [
        (vec!["simulate", "--dt", "-0.1"], "dt"),
        (vec!["simulate", "--n", "17"], "n"),
        (vec!["simulate", "--nu", "-1"], "nu"),
        (vec!["decay-fit", "--fit-window", "0", "1"], "input"),
    ] {
        let out = capillary_sw(&args, &root);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let doc: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(doc["error"], "config");
        assert_eq!(doc["field"], field, "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_status_one() {
    let root = scratch("runtime");
    let out = capillary_sw(&["simulate", "--height-file", "/nonexistent/h.csv", "--n", "16"], &root);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(doc["error"], "io");
}

#[test]
fn flags_override_the_configuration_file() {
    let root = scratch("override");
    let config = root.join("run.json");
    std::fs::write(&config, r#"{"n": 32, "solver": {"dt": 0.01, "t_end": 0.05}, "output_dir": "from-file"}"#).unwrap();
    let out = capillary_sw(&["simulate", "--config", config.to_str().unwrap(), "--n", "16"], &root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let brief: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(brief["command"], "simulate");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("from-file/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n"], 16);
    assert_eq!(manifest["config"]["solver"]["dt"], 0.01);
    assert_eq!(manifest["config_hash"], brief["config_hash"]);
}
