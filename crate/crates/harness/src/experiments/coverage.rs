//! Greedy, uniform-ergodic and clarity-ergodic coverage of a region map.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clarity_core::coverage::{
    cell_center, clarity_time_allocation, simulate_coverage, CellChannel, ClarityMap, CoverageController, CoverageRun,
    DiscFootprint, ErgodicConfig, ErgodicController, GreedyController, TimeAllocation,
};
use serde::Serialize;

use super::Report;
use crate::config::ScenarioConfig;
use crate::output::CsvWriter;

pub const CONTROLLERS: [&str; 3] = ["greedy", "uniform", "clarity"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerSummary {
    pub settling_time: Option<f64>,
    pub peak_overshoot: f64,
    pub final_error: f64,
    pub targets_met_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub greedy: ControllerSummary,
    pub uniform: ControllerSummary,
    pub clarity: ControllerSummary,
    /// Clarity-ergodic settles no later than uniform-ergodic.
    pub clarity_settles_first: bool,
    /// Clarity-ergodic overshoots strictly less than uniform-ergodic.
    pub clarity_overshoots_less: bool,
    /// Greedy error only moves away from zero through process-noise decay
    /// until all targets are met.
    pub greedy_monotone: bool,
}

pub struct CoverageOutcome {
    pub map: ClarityMap,
    pub runs: Vec<(&'static str, CoverageRun)>,
    pub summary: CoverageSummary,
}

/// Region of a cell centre: 0 = left, 1 = lower right, 2 = upper right.
fn region(cfg: &ScenarioConfig, p: [f64; 2]) -> usize {
    if p[0] < cfg.real("map.split_x") {
        0
    } else if p[1] < cfg.real("map.split_y") {
        1
    } else {
        2
    }
}

pub fn initial_map(cfg: &ScenarioConfig) -> Result<ClarityMap> {
    let side = cfg.count("map.side");
    let targets = ["target.left", "target.lower_right", "target.upper_right"].map(|k| cfg.real(k));
    let priors = ["prior.left", "prior.lower_right", "prior.upper_right"].map(|k| cfg.real(k));
    let channel = CellChannel {
        gain: cfg.real("channel.C"),
        noise: cfg.real("channel.R"),
        process_noise: cfg.real("channel.Q"),
    };
    let regions: Vec<usize> = (0..side * side).map(|i| region(cfg, cell_center(side, i))).collect();
    Ok(ClarityMap::from_cells(
        side,
        regions.iter().map(|&r| priors[r]).collect(),
        regions.iter().map(|&r| targets[r]).collect(),
        vec![channel; side * side],
    )?)
}

fn summarize(run: &CoverageRun, tol: f64) -> ControllerSummary {
    ControllerSummary {
        settling_time: run.settling_time(tol),
        peak_overshoot: run.peak_overshoot(),
        final_error: *run.mean_error.last().unwrap(),
        targets_met_at: run.targets_met_at,
    }
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<CoverageOutcome> {
    let map = initial_map(cfg)?;
    let dt = cfg.real("sim.dt");
    let steps = (cfg.real("sim.horizon") / dt).round() as usize;
    let footprint = DiscFootprint {
        radius: cfg.real("footprint.radius"),
    };
    let start = [cfg.real("robot.start_x"), cfg.real("robot.start_y")];
    let u_max = cfg.real("robot.u_max");
    let snapshot_every = match cfg.count("output.snapshot_every") {
        0 => None,
        n => Some(n),
    };
    let ergodic = ErgodicConfig {
        modes_per_axis: cfg.count("ergodic.modes"),
        u_max,
    };
    let clarity_alloc = clarity_time_allocation(&map)?;
    let uniform_alloc = TimeAllocation::uniform(map.len());

    let mut controllers: Vec<(&'static str, Box<dyn CoverageController>)> = vec![
        (
            "greedy",
            Box::new(GreedyController::new(u_max, cfg.real("greedy.gain"), cfg.real("greedy.capture_radius"))),
        ),
        ("uniform", Box::new(ErgodicController::new(ergodic, &map, &uniform_alloc))),
        ("clarity", Box::new(ErgodicController::new(ergodic, &map, &clarity_alloc))),
    ];
    let mut runs = Vec::new();
    for (name, ctrl) in controllers.iter_mut() {
        let mut m = map.clone();
        let run = simulate_coverage(&mut m, ctrl.as_mut(), &footprint, start, dt, steps, snapshot_every);
        log::info!("{name}: final mean error {:.4}", run.mean_error.last().unwrap());
        runs.push((*name, run));
    }

    let tol = cfg.real("metric.tolerance");
    let [greedy, uniform, clarity] = [0, 1, 2].map(|i| summarize(&runs[i].1, tol));
    let greedy_run = &runs[0].1;
    let greedy_until = greedy_run.targets_met_at.unwrap_or(f64::INFINITY);
    let summary = CoverageSummary {
        clarity_settles_first: match (clarity.settling_time, uniform.settling_time) {
            (Some(c), Some(u)) => c <= u,
            (Some(_), None) => true,
            (None, _) => false,
        },
        clarity_overshoots_less: clarity.peak_overshoot < uniform.peak_overshoot,
        greedy_monotone: greedy_run.error_monotone_up_to_decay(cfg.real("channel.Q"), dt, greedy_until),
        greedy,
        uniform,
        clarity,
    };
    Ok(CoverageOutcome { map, runs, summary })
}

pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<Report> {
    let outcome = simulate(cfg)?;
    let mut files: Vec<PathBuf> = Vec::new();
    for (name, run) in &outcome.runs {
        let mut csv = CsvWriter::create(
            &dir.join(format!("coverage_{name}.csv")),
            &[("t", "s"), ("mean_error", ""), ("x", ""), ("y", "")],
        )?;
        for k in 0..run.times.len() {
            csv.row(&[run.times[k], run.mean_error[k], run.positions[k][0], run.positions[k][1]])?;
        }
        files.push(csv.finish()?);

        if !run.snapshots.is_empty() {
            let mut snap = CsvWriter::create(
                &dir.join(format!("map_{name}.csv")),
                &[("t", "s"), ("cell_x", ""), ("cell_y", ""), ("q", ""), ("q_target", "")],
            )?;
            for (t, clarity) in &run.snapshots {
                for (i, q) in clarity.iter().enumerate() {
                    let c = outcome.map.center(i);
                    snap.row(&[*t, c[0], c[1], *q, outcome.map.target()[i]])?;
                }
            }
            files.push(snap.finish()?);
        }
    }
    Ok(Report {
        results: serde_json::to_value(&outcome.summary)?,
        files,
    })
}
