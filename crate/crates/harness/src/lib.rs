//! Scenario runner for the clarity experiments: config parsing, artefact
//! writers and one driver per experiment.

use std::path::PathBuf;

use anyhow::{Context, Result};

pub mod config;
pub mod experiments;
pub mod output;
pub mod selftest;

pub use config::{ConfigError, Experiment, ScenarioConfig};

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub summary_path: PathBuf,
    pub files: Vec<PathBuf>,
    pub config_hash: String,
    pub results: serde_json::Value,
}

fn config_json(cfg: &ScenarioConfig) -> serde_json::Map<String, serde_json::Value> {
    cfg.entries()
        .map(|(k, v)| {
            let value = if k == "output.dir" {
                serde_json::Value::String(v.to_string())
            } else if let Ok(n) = v.parse::<u64>() {
                serde_json::json!(n)
            } else if let Ok(x) = v.parse::<f64>() {
                serde_json::json!(x)
            } else {
                serde_json::Value::String(v.to_string())
            };
            (k.to_string(), value)
        })
        .collect()
}

/// Runs the experiment named by `cfg` and writes its artefacts, the resolved
/// config (`config.cfg`) and `summary.json` into `cfg.output_dir()`.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let dir = cfg.output_dir().to_path_buf();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let resolved = dir.join("config.cfg");
    std::fs::write(&resolved, cfg.serialize()).with_context(|| format!("writing {}", resolved.display()))?;

    log::info!("running {} ({}) into {}", cfg.experiment(), cfg.experiment().subcommand(), dir.display());
    let report = experiments::run(cfg, &dir)?;
    let mut files = vec![resolved];
    files.extend(report.files);
    let config_hash = cfg.hash();
    let summary = output::Summary {
        schema_version: output::SCHEMA_VERSION,
        experiment: cfg.experiment().id(),
        config_hash: config_hash.clone(),
        config: config_json(cfg),
        files: files.iter().map(|p| output::file_name(p)).collect(),
        results: report.results.clone(),
    };
    let summary_path = output::write_summary(&dir, &summary)?;
    Ok(RunOutput {
        dir,
        summary_path,
        files,
        config_hash,
        results: report.results,
    })
}
