//! Planar quadrotor landing with and without the clarity safety filter.

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clarity_core::cbf::{barrier_value, landing_nominal_controller, safe_control, HocbfParams, LandingGains};
use clarity_core::hjb::{rollout_until, Trajectory};
use clarity_core::info::ClarityValue;
use clarity_core::models::{planar_quadrotor, AugmentedSystem, QuadrotorParams, SensingFootprint};
use clarity_core::Error;
use serde::Serialize;

use super::Report;
use crate::config::ScenarioConfig;
use crate::output::CsvWriter;

pub fn quad_params(cfg: &ScenarioConfig) -> QuadrotorParams {
    QuadrotorParams {
        mass: cfg.real("quad.mass"),
        gravity: cfg.real("quad.gravity"),
        inertia: cfg.real("quad.inertia"),
        thrust: (0.0, cfg.real("quad.thrust_max")),
        torque: cfg.real("quad.torque_max"),
    }
}

pub fn gains(cfg: &ScenarioConfig) -> LandingGains {
    LandingGains {
        target_x: cfg.real("nominal.target_x"),
        descent_rate: cfg.real("nominal.descent_rate"),
        altitude_gain: cfg.real("nominal.altitude_gain"),
        kp: cfg.real("nominal.kp"),
        kd: cfg.real("nominal.kd"),
        kv: cfg.real("nominal.kv"),
        k_theta: cfg.real("nominal.k_theta"),
        k_omega: cfg.real("nominal.k_omega"),
        max_tilt: cfg.real("nominal.max_tilt"),
    }
}

/// Quadrotor whose sensor sees the landing site whenever it is airborne.
pub fn system(cfg: &ScenarioConfig) -> Result<AugmentedSystem> {
    let quad = planar_quadrotor(quad_params(cfg))?;
    let footprint = SensingFootprint::above(1, cfg.real("channel.C"), cfg.real("channel.R"))?;
    Ok(AugmentedSystem::new(quad, &footprint, cfg.real("channel.Q"))?)
}

pub fn start(cfg: &ScenarioConfig) -> (Vec<f64>, f64) {
    (
        vec![cfg.real("start.x1"), cfg.real("start.x2"), 0.0, 0.0, 0.0, 0.0],
        cfg.real("start.q0"),
    )
}

pub struct LandingRun {
    pub trajectory: Trajectory,
    pub barrier: Vec<f64>,
    /// Wall-clock time of each filter evaluation, in seconds.
    pub filter_seconds: Vec<f64>,
    pub active_steps: usize,
}

impl LandingRun {
    pub fn min_barrier(&self) -> f64 {
        self.barrier.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Rolls out the nominal descent, optionally through the safety filter,
/// until touchdown (`x₂ ≤ 0`) or the horizon.
pub fn simulate(cfg: &ScenarioConfig, filtered: bool) -> Result<LandingRun> {
    let sys = system(cfg)?;
    let quad = quad_params(cfg);
    let gains = gains(cfg);
    let params = HocbfParams::new(cfg.real("cbf.alpha1"), cfg.real("cbf.alpha2"))?;
    let (x0, q0) = start(cfg);
    let timings = RefCell::new(Vec::new());
    let mut active_steps = 0;
    let controller = |t: f64, x: &[f64], q: f64| -> clarity_core::Result<Vec<f64>> {
        let u_nom = landing_nominal_controller(x, &quad, &gains);
        if !filtered {
            return Ok(u_nom);
        }
        let started = Instant::now();
        let sol = safe_control(&sys, x, q, &u_nom, &params);
        timings.borrow_mut().push(started.elapsed().as_secs_f64());
        match sol {
            Ok(sol) => {
                if sol.constraint_active {
                    active_steps += 1;
                }
                Ok(sol.u)
            }
            Err(Error::Infeasible { slack }) => {
                log::error!("safety filter infeasible at t = {t}: state {x:?}, q = {q}, slack {slack}");
                Err(Error::Infeasible { slack })
            }
            Err(e) => Err(e),
        }
    };
    let trajectory = rollout_until(
        &sys,
        controller,
        &x0,
        ClarityValue::new(q0)?,
        cfg.real("sim.horizon"),
        cfg.real("sim.dt"),
        |x| x[1] <= 0.0,
    )
    .with_context(|| format!("{} landing rollout", if filtered { "filtered" } else { "nominal" }))?;
    let barrier = trajectory
        .states
        .iter()
        .zip(&trajectory.clarity)
        .map(|(x, &q)| barrier_value(x, q))
        .collect();
    Ok(LandingRun {
        trajectory,
        barrier,
        filter_seconds: timings.into_inner(),
        active_steps,
    })
}

fn write_run(dir: &Path, mode: &str, run: &LandingRun) -> Result<PathBuf> {
    let mut csv = CsvWriter::create(
        &dir.join(format!("landing_{mode}.csv")),
        &[
            ("t", "s"),
            ("x1", "m"),
            ("x2", "m"),
            ("pitch", "rad"),
            ("v1", "m/s"),
            ("v2", "m/s"),
            ("pitch_rate", "rad/s"),
            ("q", ""),
            ("thrust", "N"),
            ("torque", "N m"),
            ("h", ""),
        ],
    )?;
    let traj = &run.trajectory;
    for k in 0..traj.times.len() {
        let mut row = vec![traj.times[k]];
        row.extend(&traj.states[k]);
        row.push(traj.clarity[k]);
        // the last sample has no control held after it
        match traj.controls.get(k) {
            Some(u) => row.extend(u),
            None => row.extend([f64::NAN, f64::NAN]),
        }
        row.push(run.barrier[k]);
        csv.row(&row)?;
    }
    csv.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Latency {
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub samples: usize,
}

impl Latency {
    pub fn from_seconds(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let at = |f: f64| s[((s.len() - 1) as f64 * f).round() as usize] * 1e3;
        Some(Self {
            median_ms: at(0.5),
            p95_ms: at(0.95),
            max_ms: at(1.0),
            samples: s.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub min_h: f64,
    pub violates: bool,
    pub touched_down: bool,
    pub final_time: f64,
    pub final_altitude: f64,
    pub final_clarity: f64,
}

impl RunSummary {
    fn of(run: &LandingRun) -> Self {
        Self {
            min_h: run.min_barrier(),
            violates: run.min_barrier() < 0.0,
            touched_down: run.trajectory.exited,
            final_time: *run.trajectory.times.last().unwrap(),
            final_altitude: run.trajectory.final_state()[1],
            final_clarity: run.trajectory.final_clarity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandingSummary {
    pub nominal: RunSummary,
    pub filtered: RunSummary,
    pub filter_active_steps: usize,
    pub filter_latency: Option<Latency>,
}

pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<Report> {
    let (x0, q0) = start(cfg);
    if barrier_value(&x0, q0) < 0.0 {
        log::warn!("initial state is outside the safe set (h = {})", barrier_value(&x0, q0));
    }
    let nominal = simulate(cfg, false)?;
    let filtered = simulate(cfg, true)?;
    let files = vec![write_run(dir, "nominal", &nominal)?, write_run(dir, "filtered", &filtered)?];
    let summary = LandingSummary {
        nominal: RunSummary::of(&nominal),
        filtered: RunSummary::of(&filtered),
        filter_active_steps: filtered.active_steps,
        filter_latency: Latency::from_seconds(&filtered.filter_seconds),
    };
    log::info!("min h: nominal {:.4}, filtered {:.4}", summary.nominal.min_h, summary.filtered.min_h);
    Ok(Report {
        results: serde_json::to_value(&summary)?,
        files,
    })
}
