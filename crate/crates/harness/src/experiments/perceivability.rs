//! Perceivability domains and optimal rollouts of a single integrator and a
//! Dubins boat in a sheared current with a square sensing region.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clarity_core::hjb::{
    optimal_control, perceivability_domain, rollout, solve_hjb, Axis, Dissipation, Grid, SchemeConfig,
    TimeIntegrator, Trajectory, ValueFunction,
};
use clarity_core::info::ClarityValue;
use clarity_core::models::{dubins_boat, single_integrator_2d, square_footprint, AugmentedSystem, FlowField};
use serde::Serialize;

use super::Report;
use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{write_value_function, CsvWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    SingleIntegrator,
    DubinsBoat,
}

impl Model {
    pub const ALL: [Model; 2] = [Model::SingleIntegrator, Model::DubinsBoat];

    pub fn tag(self) -> &'static str {
        match self {
            Model::SingleIntegrator => "single_integrator",
            Model::DubinsBoat => "dubins_boat",
        }
    }

    /// Prefix of the model's config keys.
    pub fn prefix(self) -> &'static str {
        match self {
            Model::SingleIntegrator => "si",
            Model::DubinsBoat => "dubins",
        }
    }
}

pub fn scheme(cfg: &ScenarioConfig) -> SchemeConfig {
    SchemeConfig {
        cfl: cfg.real("scheme.cfl"),
        integrator: match cfg.text("scheme.integrator") {
            "tvd_rk2" => TimeIntegrator::TvdRk2,
            _ => TimeIntegrator::Euler,
        },
        dissipation: match cfg.text("scheme.dissipation") {
            "local" => Dissipation::Local,
            _ => Dissipation::Global,
        },
        ..SchemeConfig::default()
    }
}

fn axis_bounds(cfg: &ScenarioConfig, model: Model, axis: &str) -> Result<(f64, f64)> {
    let key = |end: &str| format!("{}.{axis}_{end}", model.prefix());
    let (lo, hi) = (cfg.real(&key("min")), cfg.real(&key("max")));
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(ConfigError {
            source_name: None,
            line: None,
            message: format!("{} ({lo}) must be below {} ({hi})", key("min"), key("max")),
        }
        .into());
    }
    Ok((lo, hi))
}

pub fn system(cfg: &ScenarioConfig, model: Model) -> Result<AugmentedSystem> {
    let flow = FlowField::shear(cfg.real("flow.shear"), cfg.real("flow.drift_y"));
    let vehicle = match model {
        Model::SingleIntegrator => single_integrator_2d(flow, cfg.real("si.u_max"))?,
        Model::DubinsBoat => dubins_boat(flow, cfg.real("dubins.speed"), cfg.real("dubins.turn_max"))?,
    };
    let footprint = square_footprint(
        [cfg.real("sensing.center_x"), cfg.real("sensing.center_y")],
        cfg.real("sensing.half_width"),
        cfg.real("channel.C"),
        cfg.real("channel.R"),
    )?;
    Ok(AugmentedSystem::new(vehicle, &footprint, cfg.real("channel.Q"))?)
}

pub fn grid(cfg: &ScenarioConfig, model: Model) -> Result<Grid> {
    let (b1, b2) = (axis_bounds(cfg, model, "x1")?, axis_bounds(cfg, model, "x2")?);
    let x1 = |n| Axis::new(b1.0, b1.1, n);
    let x2 = |n| Axis::new(b2.0, b2.1, n);
    Ok(match model {
        Model::SingleIntegrator => Grid::new(
            vec![x1(cfg.count("si.nodes_x1")), x2(cfg.count("si.nodes_x2"))],
            cfg.count("si.nodes_q"),
        )?,
        Model::DubinsBoat => Grid::new(
            vec![
                x1(cfg.count("dubins.nodes_x1")),
                x2(cfg.count("dubins.nodes_x2")),
                Axis::periodic(-PI, PI, cfg.count("dubins.nodes_heading")),
            ],
            cfg.count("dubins.nodes_q"),
        )?,
    })
}

pub fn start_state(cfg: &ScenarioConfig, model: Model) -> Vec<f64> {
    match model {
        Model::SingleIntegrator => vec![cfg.real("start.x1"), cfg.real("start.x2")],
        Model::DubinsBoat => vec![cfg.real("start.x1"), cfg.real("start.x2"), cfg.real("start.heading")],
    }
}

/// Closed-loop rollout under the value function's optimal feedback.
pub fn optimal_rollout(vf: &ValueFunction, sys: &AugmentedSystem, x0: &[f64], q0: f64, dt: f64) -> Result<Trajectory> {
    Ok(rollout(
        sys,
        |t, x, q| optimal_control(vf, t, x, q, sys),
        x0,
        ClarityValue::new(q0)?,
        vf.horizon,
        dt,
        Some(&vf.grid),
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consistency {
    pub candidates: usize,
    pub checked: usize,
    pub passed: usize,
    /// Smallest `q(T) - (q* - δ)` over the checked states.
    pub worst_margin: Option<f64>,
}

/// Rolls out from up to `samples` grid nodes with `V(0) ≥ q* + δ`, evenly
/// spaced through the node ordering, and counts those reaching `q* - δ`.
pub fn consistency_check(
    vf: &ValueFunction,
    sys: &AugmentedSystem,
    q_star: f64,
    delta: f64,
    samples: usize,
    dt: f64,
) -> Result<Consistency> {
    let n = vf.grid.state_dims();
    let candidates: Vec<usize> = vf
        .initial()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= q_star + delta)
        .map(|(i, _)| i)
        .collect();
    let picks: Vec<usize> = if candidates.len() <= samples {
        candidates.clone()
    } else {
        (0..samples).map(|j| candidates[j * candidates.len() / samples]).collect()
    };
    let mut passed = 0;
    let mut worst: Option<f64> = None;
    for &idx in &picks {
        let p = vf.grid.point(idx);
        let traj = optimal_rollout(vf, sys, &p[..n], p[n], dt)?;
        let margin = traj.final_clarity() - (q_star - delta);
        if margin >= 0.0 {
            passed += 1;
        }
        worst = Some(worst.map_or(margin, |w: f64| w.min(margin)));
    }
    Ok(Consistency {
        candidates: candidates.len(),
        checked: picks.len(),
        passed,
        worst_margin: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model: Model,
    pub nodes: usize,
    pub hjb_steps: usize,
    pub hjb_dt: f64,
    pub solve_seconds: f64,
    pub start_value: f64,
    pub perceivable: bool,
    pub margin: f64,
    pub domain_nodes: usize,
    pub final_clarity: f64,
    pub reaches_q_star: bool,
    pub rollout_exited: bool,
    pub clamp_events: usize,
    pub consistency: Consistency,
}

pub struct ModelOutcome {
    pub model: Model,
    pub system: AugmentedSystem,
    pub value: ValueFunction,
    pub trajectory: Trajectory,
    pub summary: ModelSummary,
}

pub fn solve_model(cfg: &ScenarioConfig, model: Model) -> Result<ModelOutcome> {
    let sys = system(cfg, model)?;
    let grid = grid(cfg, model)?;
    let horizon = cfg.real("target.horizon");
    let q_star = cfg.real("target.q_star");
    let started = Instant::now();
    let value = solve_hjb(&sys, &grid, horizon, &scheme(cfg)).with_context(|| format!("solving HJB for {}", model.tag()))?;
    let solve_seconds = started.elapsed().as_secs_f64();
    log::info!("{}: HJB solved in {solve_seconds:.1} s ({} steps)", model.tag(), value.steps);

    let x0 = start_state(cfg, model);
    let q0 = cfg.real("start.q0");
    let start_value = value
        .value_at(&x0, q0)
        .with_context(|| format!("start state {x0:?} is outside the {} grid", model.tag()))?;
    let dt = cfg.real("rollout.dt");
    let trajectory = optimal_rollout(&value, &sys, &x0, q0, dt)?;
    let consistency = consistency_check(
        &value,
        &sys,
        q_star,
        cfg.real("consistency.delta"),
        cfg.count("consistency.samples"),
        dt,
    )?;
    let summary = ModelSummary {
        model,
        nodes: grid.len(),
        hjb_steps: value.steps,
        hjb_dt: value.dt,
        solve_seconds,
        start_value,
        perceivable: start_value >= q_star,
        margin: start_value - q_star,
        domain_nodes: perceivability_domain(&value, q_star).count(),
        final_clarity: trajectory.final_clarity(),
        reaches_q_star: trajectory.final_clarity() >= q_star,
        rollout_exited: trajectory.exited,
        clamp_events: trajectory.clamp_events,
        consistency,
    };
    Ok(ModelOutcome {
        model,
        system: sys,
        value,
        trajectory,
        summary,
    })
}

fn write_domain_slice(dir: &Path, outcome: &ModelOutcome, q0: f64, q_star: f64) -> Result<PathBuf> {
    let grid = &outcome.value.grid;
    let n = grid.state_dims();
    let mut columns: Vec<(&str, &str)> = vec![("x1", "m"), ("x2", "m")];
    if n == 3 {
        columns.push(("heading", "rad"));
    }
    columns.extend([("value", ""), ("in_domain", "")]);
    let path = dir.join(format!("domain_slice_q{q0:.2}_{}.csv", outcome.model.tag()));
    let mut csv = CsvWriter::create(&path, &columns)?;
    let stride = grid.clarity_axis().nodes;
    for s in 0..grid.spatial_len() {
        let mut p = grid.point(s * stride);
        p[n] = q0;
        let v = grid.interpolate(outcome.value.initial(), &p)?;
        let mut row = p[..n].to_vec();
        row.extend([v, if v >= q_star { 1.0 } else { 0.0 }]);
        csv.row(&row)?;
    }
    csv.finish()
}

fn write_rollout(dir: &Path, outcome: &ModelOutcome) -> Result<PathBuf> {
    let traj = &outcome.trajectory;
    let n = outcome.system.state_dim();
    let m = outcome.system.vehicle.control_dim();
    let mut columns: Vec<(&str, &str)> = vec![("t", "s"), ("x1", "m"), ("x2", "m")];
    if n == 3 {
        columns.push(("heading", "rad"));
    }
    columns.push(("q", ""));
    match outcome.model {
        Model::SingleIntegrator => columns.extend([("u1", "m/s"), ("u2", "m/s")]),
        Model::DubinsBoat => columns.push(("turn_rate", "rad/s")),
    }
    let mut csv = CsvWriter::create(&dir.join(format!("rollout_{}.csv", outcome.model.tag())), &columns)?;
    for k in 0..traj.times.len() {
        let mut row = vec![traj.times[k]];
        row.extend(&traj.states[k]);
        row.push(traj.clarity[k]);
        // the last sample has no control held after it
        match traj.controls.get(k) {
            Some(u) => row.extend(u),
            None => row.extend(std::iter::repeat_n(f64::NAN, m)),
        }
        csv.row(&row)?;
    }
    csv.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerceivabilitySummary {
    pub q_star: f64,
    pub horizon: f64,
    pub start: Vec<f64>,
    pub single_integrator: ModelSummary,
    pub dubins_boat: ModelSummary,
}

pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<Report> {
    let q_star = cfg.real("target.q_star");
    let slice_q0 = cfg.real("output.slice_q0");
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for model in Model::ALL {
        let outcome = solve_model(cfg, model)?;
        let (bin, hdr) = write_value_function(dir, &format!("value_t0_{}", model.tag()), &outcome.value)?;
        files.extend([bin, hdr]);
        files.push(write_domain_slice(dir, &outcome, slice_q0, q_star)?);
        files.push(write_rollout(dir, &outcome)?);
        log::info!(
            "{}: q(T) = {:.4} (V = {:.4} at the start)",
            model.tag(),
            outcome.summary.final_clarity,
            outcome.summary.start_value
        );
        summaries.push(outcome.summary);
    }
    let dubins_boat = summaries.pop().unwrap();
    let single_integrator = summaries.pop().unwrap();
    let summary = PerceivabilitySummary {
        q_star,
        horizon: cfg.real("target.horizon"),
        start: start_state(cfg, Model::DubinsBoat),
        single_integrator,
        dubins_boat,
    };
    Ok(Report {
        results: serde_json::to_value(&summary)?,
        files,
    })
}
