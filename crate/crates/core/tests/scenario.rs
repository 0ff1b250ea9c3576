use std::fs;
use std::path::Path;

use liedrag::scenario::{execute, ScenarioConfig};
use sha2::{Digest, Sha256};

fn config(extra: &str) -> ScenarioConfig {
    let text = format!(
        "grid.n = 16\ninit.name = \"stratified_blob\"\ninit.params.b_amp = 0.1\n\
         run.observer_every = 2\nparticles.count = 8\n\
         particles.diagnostics = [\"S\", \"magnetic_scalar\", \"cauchy_b\"]\n{extra}"
    );
    ScenarioConfig::from_toml(&text).unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

fn manifest(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("manifest.toml")).unwrap().parse().unwrap()
}

#[test]
fn zero_duration_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("run.t_end = 0.0");
    let out = execute(&cfg, Some(dir.path()), None).unwrap();
    assert!(out.error.is_none());
    assert!(out.records.is_empty());
    let diag = lines(&dir.path().join("diagnostics.csv"));
    assert_eq!(diag.len(), 1);
    assert!(diag[0].starts_with("t,mass,energy,"));
    assert!(diag[0].contains("fluid_helicity_res_L2"));
    assert_eq!(lines(&dir.path().join("particles.csv")).len(), 1);
    assert_eq!(manifest(dir.path())["status"].as_str(), Some("ok"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = config("run.t_end = 0.05\nrun.freeze_dt = true");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    execute(&cfg, Some(a.path()), None).unwrap().into_result().unwrap();
    execute(&cfg, Some(b.path()), None).unwrap().into_result().unwrap();
    for name in ["diagnostics.csv", "particles.csv", "config.toml"] {
        let (x, y) = (fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
    assert!(lines(&a.path().join("diagnostics.csv")).len() >= 3);
}

#[test]
fn manifest_hashes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("run.t_end = 0.03\noutput.dump_fields = true\noutput.dump_every = 2");
    let out = execute(&cfg, Some(dir.path()), None).unwrap().into_result().unwrap();
    let m = manifest(dir.path());
    assert_eq!(m["schema_version"].as_integer(), Some(1));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len() + 1, out.files.len());
    for entry in files {
        let path = dir.path().join(entry["path"].as_str().unwrap());
        let bytes = fs::read(&path).unwrap();
        assert_eq!(entry["bytes"].as_integer(), Some(bytes.len() as i64));
        assert_eq!(entry["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let paths: Vec<&str> = files.iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert!(paths.contains(&"fields/obs_00000/rho.bin"));
    let rho = fs::read(dir.path().join("fields/obs_00000/rho.bin")).unwrap();
    assert_eq!(rho.len(), 16 * 16 * 16 * 8);
}

#[test]
fn blowup_keeps_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::from_toml(
        "grid.n = 16\ninit.name = \"abc_beltrami\"\nrun.t_end = 50.0\nrun.dt = 2.0\nrun.observer_every = 1",
    )
    .unwrap();
    let out = execute(&cfg, Some(dir.path()), None).unwrap();
    let err = out.error.as_ref().expect("run should fail");
    assert_eq!(err.exit_code(), 3);
    let m = manifest(dir.path());
    assert_eq!(m["status"].as_str(), Some("failed"));
    let last = m["last_valid_time"].as_float().unwrap();
    assert_eq!(last, out.last_valid_time());
    assert!(last < 50.0);
    let diag = lines(&dir.path().join("diagnostics.csv"));
    assert!(diag.len() >= 2, "the initial row survives");
}

#[test]
fn recorded_integrals_match_direct_evaluation() {
    let cfg = config("run.t_end = 0.02");
    let out = execute(&cfg, None, None).unwrap().into_result().unwrap();
    let first = &out.records[0];
    assert_eq!(first.t, 0.0);
    let mass = first.integral("mass").unwrap();
    let st = liedrag::scenario::build_state(&cfg).unwrap();
    assert_eq!(mass, liedrag::invariants::total_mass(&st));
    assert!(first.integral("fluid_helicity").unwrap().is_nan());
    assert!(first.integral("cross_helicity").unwrap().is_finite());
    assert!(out.records.last().unwrap().t > 0.019);
}
