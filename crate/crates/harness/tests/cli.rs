use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clarity_harness::{Experiment, ScenarioConfig};

fn clarity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clarity")).args(args).output().expect("spawn clarity")
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.cfg"))
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(clarity(&["orbit"]).status.code(), Some(2));
}

#[test]
fn malformed_config_line_exits_with_2_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "experiment = E1\nchannel.C = banana\n").unwrap();
    let out = clarity(&["energy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.cfg:2:"));
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let out = clarity(&["landing", "--config", scenario_path("e1").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_scenarios_round_trip() {
    for (name, exp) in ["e1", "e2", "e3", "e4"].into_iter().zip(Experiment::ALL) {
        let cfg = ScenarioConfig::load(&scenario_path(name)).unwrap();
        assert_eq!(cfg.experiment(), exp);
        assert_eq!(ScenarioConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }
}

#[test]
fn energy_writes_artefacts_and_overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = scenario_path("e1");
    let out = clarity(&["energy", "--quiet", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(a.join("pareto.csv").is_file());
    let base = summary(&a);
    assert_eq!(base["experiment"], "E1");
    assert!(base["files"].as_array().unwrap().iter().any(|f| f.as_str().unwrap().ends_with("pareto.csv")));

    let out = clarity(&[
        "energy",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--override",
        "Q=0.01",
    ]);
    assert!(out.status.success());
    let changed = summary(&b);
    assert_ne!(base["config_hash"], changed["config_hash"]);
    assert_eq!(changed["config"]["channel.Q"], 0.01);
}

#[test]
fn output_directory_does_not_enter_the_hash() {
    let mut a = ScenarioConfig::defaults(Experiment::E4);
    let b = a.clone();
    a.set_output_dir(Path::new("elsewhere")).unwrap();
    assert_eq!(a.hash(), b.hash());
}

#[test]
fn selftest_passes_with_the_default_seed() {
    let out = clarity(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("8 of 8 checks passed"));
}
