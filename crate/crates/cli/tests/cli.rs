use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn fracwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracwave"))
        .args(args)
        .env_remove("FRACWAVE_SEED")
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, json: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config-in.json");
    fs::write(&cfg, json).unwrap();
    let out = dir.join("out");
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    fracwave(&args)
}

fn csv(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn check_reports_dalang_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        r#"{"model":{"k":2,"d":2},"measure":{"type":"riesz","beta":1},"solver":{"alpha":0.5},
            "experiment":{"kind":"check"}}"#,
        &["--check"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = csv(dir.path(), "conditions.csv");
    assert!(table.starts_with("condition,method,holds,status,value,tolerance\n"));
    assert!(table.contains("Dalang_1_5,analytic,true,holds"));
    assert!(table.contains("Dalang_1_5,quadrature,true,holds"));
}

#[test]
fn exponents_match_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        r#"{"model":{"k":1,"d":1},"measure":{"type":"riesz","beta":0.5},
            "experiment":{"kind":"exponents","delta":1,"gamma_ic":0}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = csv(dir.path(), "exponents.csv");
    assert!(table.contains("theta1,0.75\n"), "{table}");
    assert!(table.contains("moment_slope,1.5\n"), "{table}");
    assert!(table.contains("alpha_max,0.75\n"), "{table}");
}

#[test]
fn invalid_measure_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        r#"{"model":{"k":1,"d":1},"measure":{"type":"riesz","beta":2},"experiment":{"kind":"check"}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model:") && err.contains("beta"), "{err}");
}

#[test]
fn unknown_key_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        r#"{"model":{"k":1,"d":1,"kk":2},"measure":{"type":"flat"},"experiment":{"kind":"check"}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kk"));
}

#[test]
fn blow_up_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        r#"{"model":{"k":1,"d":1},"measure":{"type":"flat"},"grid":{"N":32},
            "solver":{"b":{"type":"linear","lambda":10000},"position":"bump"},
            "experiment":{"kind":"simulate"}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("blow-up"));
}

const SIMULATE: &str = r#"{"model":{"k":1,"d":1,"T":0.25},"measure":{"type":"riesz","beta":0.5},"grid":{"N":64},
    "solver":{"sigma":{"type":"sine-bounded","lambda":1},"position":"bump","alpha":0.25,"seed":11},
    "experiment":{"kind":"simulate","n_paths":3,"times":[0.125,0.25]}}"#;

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), SIMULATE, &["--workers", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["experiment"], "simulate");
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    let listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            let name = f["name"].as_str().unwrap().to_string();
            let digest = hex::encode(Sha256::digest(fs::read(out.join(&name)).unwrap()));
            assert_eq!(f["sha256"], digest.as_str());
            name
        })
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    assert_eq!(on_disk, listed_sorted);
    let paths = csv(dir.path(), "paths.csv");
    assert_eq!(paths.lines().count(), 1 + 3 * 3, "{paths}");
}

#[test]
fn echoed_config_replays_identically() {
    let first = tempfile::tempdir().unwrap();
    assert_eq!(run_config(first.path(), SIMULATE, &["--workers", "1"]).status.code(), Some(0));
    let echoed = fs::read_to_string(first.path().join("out/config.json")).unwrap();
    let second = tempfile::tempdir().unwrap();
    assert_eq!(run_config(second.path(), &echoed, &["--workers", "1"]).status.code(), Some(0));
    assert_eq!(csv(first.path(), "paths.csv"), csv(second.path(), "paths.csv"));
    assert_eq!(echoed, fs::read_to_string(second.path().join("out/config.json")).unwrap());
}

#[test]
fn seed_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, SIMULATE).unwrap();
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_fracwave"))
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--set", "solver.seed=5"])
        .env("FRACWAVE_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    let o = Command::new(env!("CARGO_BIN_EXE_fracwave"))
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("FRACWAVE_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 99);
}

#[test]
fn noise_validation_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        r#"{"model":{"k":1,"d":1},"measure":{"type":"riesz","beta":0.5},"grid":{"N":128},
            "experiment":{"kind":"validate-noise","n_samples":4000}}"#,
        &["--check"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(csv(dir.path(), "noise.csv").contains(",true\n"));
}

#[test]
fn quadrature_scaling_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        r#"{"model":{"k":1,"d":1},"measure":{"type":"riesz","beta":0.5},
            "experiment":{"kind":"scaling"}}"#,
        &["--check"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(csv(dir.path(), "increments.csv").lines().count(), 9);
}

#[test]
fn self_test_catches_a_flipped_kernel() {
    let o = fracwave(&["self-test", "--scale", "quick", "--criteria", "1", "--mutation", "flip-kernel-sign"]);
    assert_eq!(o.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("isometry") && stdout.contains("FAIL"), "{stdout}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 (isometry)"));
}

#[test]
fn self_test_passes_on_the_correct_kernel() {
    let o = fracwave(&["self-test", "--scale", "quick", "--criteria", "1,6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
