//! One module per shipped experiment. Each `run` writes its artefacts into
//! the given directory and returns the machine-readable results.

use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::config::{Experiment, ScenarioConfig};

pub mod coverage;
pub mod energy;
pub mod landing;
pub mod perceivability;

pub struct Report {
    pub results: serde_json::Value,
    pub files: Vec<PathBuf>,
}

pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<Report> {
    match cfg.experiment() {
        Experiment::E1 => energy::run(cfg, dir),
        Experiment::E2 => coverage::run(cfg, dir),
        Experiment::E3 => perceivability::run(cfg, dir),
        Experiment::E4 => landing::run(cfg, dir),
    }
}
