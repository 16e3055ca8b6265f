use std::fs;

use radial_blowup::experiments::output::{parse_manifest, INCOMPLETE_SUFFIX};
use radial_blowup::experiments::{emit_results, run_scenario, verify_manifest, ScenarioConfig};
use radial_blowup::Error;

const SINGLE: &str = r#"
scenario = "single_run"

[physical]
chi = 2.0
n = 3
R = 1.0

[grid]
N = 128

[control]
t_end = 0.01

[params]
M = [8.0]
m = [1000.0]

[output]
snapshot_every = 200
"#;

#[test]
fn emitted_files_match_the_manifest() {
    let cfg = ScenarioConfig::parse(SINGLE).unwrap();
    let out = run_scenario(&cfg, 1).unwrap();
    assert!(out.complete());
    assert_eq!(out.rows[0].outcome, "blew_up");
    assert!(out.snapshots.len() >= 3);

    let dir = tempfile::tempdir().unwrap();
    let emitted = emit_results(&out, &cfg, dir.path()).unwrap();
    assert!(emitted.complete);
    let manifest = verify_manifest(dir.path()).unwrap();
    assert!(manifest.complete);
    assert_eq!(ScenarioConfig::parse(&manifest.config).unwrap(), cfg);
    assert!(manifest.files.iter().all(|f| f.path != "timings.csv" && f.path != "manifest.json"));

    let header = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(header.starts_with("scenario,run,chi,n,R,N,M,m,eps,outcome,"));

    let victim = dir.path().join(&manifest.files[0].path);
    let mut bytes = fs::read(&victim).unwrap();
    bytes.push(b'\n');
    fs::write(&victim, bytes).unwrap();
    assert!(verify_manifest(dir.path()).is_err());
}

#[test]
fn failed_scenario_keeps_the_incomplete_suffix() {
    let cfg = ScenarioConfig::parse(SINGLE).unwrap();
    let mut out = run_scenario(&cfg, 1).unwrap();
    out.error = Some("interrupted".into());
    let dir = tempfile::tempdir().unwrap();
    let emitted = emit_results(&out, &cfg, dir.path()).unwrap();
    assert!(!emitted.complete);
    assert!(!dir.path().join("results.csv").exists());
    assert!(dir.path().join(format!("results.csv{INCOMPLETE_SUFFIX}")).exists());
    let text = fs::read_to_string(dir.path().join(format!("manifest.json{INCOMPLETE_SUFFIX}"))).unwrap();
    let manifest = parse_manifest(&text).unwrap();
    assert!(!manifest.complete);
    assert_eq!(manifest.error.as_deref(), Some("interrupted"));
}

#[test]
fn sub_run_errors_are_reported_not_raised() {
    // the cap of M = 64 is not resolved on 64 cells
    let text = SINGLE
        .replace("N = 128", "N = 64")
        .replace("scenario = \"single_run\"", "scenario = \"limit_blowup_sweep\"")
        .replace("M = [8.0]", "M = [8.0, 64.0]");
    let cfg = ScenarioConfig::parse(&text).unwrap();
    let out = run_scenario(&cfg, 0).unwrap();
    assert_eq!(out.rows.len(), 1);
    assert!(out.error.as_deref().unwrap().contains("resolve"));
}

#[test]
fn config_errors_carry_positions_and_keys() {
    match ScenarioConfig::parse(&SINGLE.replace("chi = 2.0", "chi = \"two\"")) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
    match ScenarioConfig::parse(&SINGLE.replace("N = 128", "N = 8")) {
        Err(Error::Validation { key, .. }) => assert_eq!(key, "grid.N"),
        other => panic!("{other:?}"),
    }
}
