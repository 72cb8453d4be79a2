//! In-process property suite behind `clarity selftest`.
//!
//! Every check draws its inputs from one seeded generator, so a failure
//! reproduces exactly on rerun.

use std::sync::Arc;
use std::time::Instant;

use clarity_core::belief::{
    clarity_limit, closed_form_clarity, integrate_covariance, integrate_scalar_clarity, invert_closed_form,
    matrix_clarity_rate, CovarianceState, MatrixEnvironment, ScalarChannel,
};
use clarity_core::cbf::{qp_filter, QpSpec};
use clarity_core::coverage::{update_clarity_map, CellChannel, ClarityMap, DiscFootprint};
use clarity_core::hjb::{solve_hjb, Axis, Grid, SchemeConfig};
use clarity_core::info::{clarity_from_entropy, clarity_of_gaussian, entropy_of_gaussian, ClarityValue, GaussianBelief};
use clarity_core::models::{AugmentedSystem, ControlBox, SensingFootprint, VehicleModel};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::{Experiment, ScenarioConfig};

pub const DEFAULT_SEED: u64 = 0x5eed_c1a2;

type CheckResult = Result<String, String>;

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_spd(rng: &mut StdRng, n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let d = DVector::from_fn(n, |_, _| rng.random_range(0.05..2.0));
    &l * l.transpose() + DMatrix::from_diagonal(&d)
}

fn q(v: f64) -> ClarityValue {
    ClarityValue::saturating(v)
}

fn gaussian_routes(rng: &mut StdRng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=4);
        let b = GaussianBelief::new(DVector::zeros(n), random_spd(rng, n)).map_err(|e| e.to_string())?;
        let direct = clarity_of_gaussian(&b).get();
        let via = clarity_from_entropy(entropy_of_gaussian(&b)).get();
        worst = worst.max((direct - via).abs() / direct);
    }
    ensure(worst <= 1e-12, || format!("relative gap {worst:e}"))?;
    Ok(format!("worst relative gap {worst:.1e}"))
}

fn closed_form_vs_rk4(rng: &mut StdRng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (gain, noise, qn) = (rng.random_range(0.2..2.0), rng.random_range(0.5..20.0), rng.random_range(1e-4..0.05));
        let q0 = rng.random_range(0.0..1.0);
        let ch = ScalarChannel::constant(gain, noise, qn).map_err(|e| e.to_string())?;
        let traj = integrate_scalar_clarity(q(q0), &[0.0], &ch, 0.0, 100.0, 0.01).map_err(|e| e.to_string())?;
        for (t, s) in traj.times.iter().zip(&traj.states).step_by(50) {
            let exact = closed_form_clarity(*t, q(q0), gain, noise, qn).map_err(|e| e.to_string())?.get();
            worst = worst.max((exact - s[0]).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn inversion_round_trip(rng: &mut StdRng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (gain, noise, qn) = (rng.random_range(0.1..3.0), rng.random_range(0.1..10.0), rng.random_range(1e-4..0.1));
        let lim = clarity_limit(gain, noise, qn).map_err(|e| e.to_string())?.get();
        let target = rng.random_range(0.05..0.95) * lim;
        let dwell = invert_closed_form(q(target), q(0.0), gain, noise, qn).map_err(|e| e.to_string())?;
        let back = closed_form_clarity(dwell.seconds, q(0.0), gain, noise, qn).map_err(|e| e.to_string())?.get();
        worst = worst.max((back - target).abs());
    }
    ensure(worst < 1e-9, || format!("round-trip error {worst:e}"))?;
    Ok(format!("worst round-trip error {worst:.1e}"))
}

fn matrix_rate(rng: &mut StdRng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let n = 2 + i % 2;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
        let c = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        let env = MatrixEnvironment::new(
            a,
            DMatrix::identity(n, n) * 0.05,
            Arc::new(move |_| c.clone()),
            Arc::new(|_| DMatrix::identity(1, 1) * 0.5),
        )
        .map_err(|e| e.to_string())?;
        let p = CovarianceState::new(random_spd(rng, n)).map_err(|e| e.to_string())?;
        let rate = matrix_clarity_rate(&p, &env, &[0.0]).map_err(|e| e.to_string())?;
        let h = 1e-4;
        let path = integrate_covariance(&p, &env, |_| vec![0.0], 0.0, 2.0 * h, h).map_err(|e| e.to_string())?;
        let qs: Vec<f64> = path.iter().map(|(_, p)| p.clarity().map(|c| c.get()).unwrap_or(f64::NAN)).collect();
        let fd = (-3.0 * qs[0] + 4.0 * qs[1] - qs[2]) / (2.0 * h);
        worst = worst.max((fd - rate).abs() / rate.abs().max(1e-2));
    }
    ensure(worst <= 1e-5, || format!("relative gap {worst:e}"))?;
    Ok(format!("worst relative gap {worst:.1e}"))
}

fn frozen_value_function(_: &mut StdRng) -> CheckResult {
    let controls = ControlBox::symmetric(1.0, 1).map_err(|e| e.to_string())?;
    let sys = AugmentedSystem::new(
        VehicleModel::frozen(1, controls),
        &SensingFootprint::uniform(0.0, 1.0).map_err(|e| e.to_string())?,
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let grid = Grid::new(vec![Axis::new(-1.0, 1.0, 11)], 21).map_err(|e| e.to_string())?;
    let vf = solve_hjb(&sys, &grid, 2.0, &SchemeConfig::default()).map_err(|e| e.to_string())?;
    let worst = (0..grid.len())
        .map(|i| (vf.initial()[i] - grid.point(i)[1]).abs())
        .fold(0.0, f64::max);
    ensure(worst == 0.0, || format!("V(0, x, q) differs from q by {worst:e}"))?;
    Ok("V(0, x, q) = q at every node".into())
}

fn qp_brute_force(rng: &mut StdRng) -> CheckResult {
    const N: usize = 200;
    let limit = 2.0;
    let controls = ControlBox::symmetric(limit, 2).map_err(|e| e.to_string())?;
    let cell = 2.0 * limit / (N - 1) as f64;
    let mut checked = 0;
    for _ in 0..100 {
        let spec = QpSpec {
            u_nom: vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
            a: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            b: rng.random_range(-2.0..1.0),
            controls: controls.clone(),
        };
        let cost = |u: &[f64]| (u[0] - spec.u_nom[0]).powi(2) + (u[1] - spec.u_nom[1]).powi(2);
        let mut best = f64::INFINITY;
        for i in 0..N {
            for j in 0..N {
                let u = [-limit + i as f64 * cell, -limit + j as f64 * cell];
                if spec.a[0] * u[0] + spec.a[1] * u[1] >= spec.b {
                    best = best.min(cost(&u));
                }
            }
        }
        match qp_filter(&spec) {
            Ok(sol) => {
                let c = cost(&sol.u);
                let feasible = controls.contains(&sol.u) && spec.a[0] * sol.u[0] + spec.a[1] * sol.u[1] >= spec.b - 1e-9;
                ensure(feasible, || format!("filter output {:?} is infeasible", sol.u))?;
                ensure(c <= best + 1e-12, || format!("filter cost {c} exceeds grid optimum {best}"))?;
                // a feasible grid point lies within two cell diagonals of the optimum
                let d = 2.0 * 2f64.sqrt() * cell;
                let slack = 2.0 * d * c.sqrt() + d * d;
                ensure(best.is_infinite() || best - c <= slack, || format!("filter cost {c} vs grid {best}"))?;
                checked += 1;
            }
            Err(_) => ensure(best.is_infinite(), || format!("filter reported infeasible, grid found {best}"))?,
        }
    }
    Ok(format!("{checked} feasible instances agree with a {N}x{N} grid"))
}

fn coverage_map_bounds(rng: &mut StdRng) -> CheckResult {
    let channel = CellChannel {
        gain: 1.0,
        noise: 0.25,
        process_noise: 0.01,
    };
    let mut map = ClarityMap::new(8, 0.3, channel, |_| 0.5).map_err(|e| e.to_string())?;
    let fp = DiscFootprint { radius: 0.2 };
    for _ in 0..2000 {
        let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        update_clarity_map(&mut map, p, &fp, 0.05);
        ensure(map.clarity().iter().all(|v| (0.0..=1.0).contains(v)), || "clarity left [0, 1]".into())?;
    }
    Ok("clarity stays in [0, 1]".into())
}

fn config_round_trip(_: &mut StdRng) -> CheckResult {
    for exp in Experiment::ALL {
        let cfg = ScenarioConfig::defaults(exp);
        let back = ScenarioConfig::parse(&cfg.serialize()).map_err(|e| e.to_string())?;
        ensure(back == cfg, || format!("{exp} defaults do not round trip"))?;
    }
    Ok("defaults of every experiment round trip".into())
}

type Check = (&'static str, fn(&mut StdRng) -> CheckResult);

const CHECKS: [Check; 8] = [
    ("gaussian clarity: determinant and entropy routes agree", gaussian_routes),
    ("scalar clarity: closed form matches RK4", closed_form_vs_rk4),
    ("scalar clarity: dwell-time inversion round trips", inversion_round_trip),
    ("matrix clarity rate matches Riccati finite difference", matrix_rate),
    ("HJB: frozen system keeps V = q", frozen_value_function),
    ("safety QP matches brute-force minimiser", qp_brute_force),
    ("coverage map stays in [0, 1]", coverage_map_bounds),
    ("scenario configs round trip", config_round_trip),
];

/// Runs every check with generators derived from `seed`.
pub fn run(seed: u64) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = StdRng::seed_from_u64(seed.wrapping_add(i as u64));
            let started = Instant::now();
            let result = check(&mut rng);
            let seconds = started.elapsed().as_secs_f64();
            let (passed, detail) = match result {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome {
                name,
                passed,
                detail,
                seconds,
            }
        })
        .collect()
}
