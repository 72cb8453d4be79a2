//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdicts always reach the
//! output. Oracles are computed here, independently of the library routes
//! they check; the shipped scenarios are run twice, once for the property
//! checks and once more for the determinism comparison.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clarity_core::belief::{closed_form_clarity, matrix_clarity_rate, CovarianceState, MatrixEnvironment};
use clarity_core::cbf::{qp_filter, QpSpec};
use clarity_core::hjb::{solve_hjb, SchemeConfig};
use clarity_core::info::{
    clarity_from_entropy, clarity_of_gaussian, clarity_of_uniform, entropy_of_gaussian, error_bound_from_clarity,
    ClarityValue, Entropy, GaussianBelief, UniformBelief,
};
use clarity_core::models::{single_integrator_2d, AugmentedSystem, ControlBox, FlowField, SensingFootprint, VehicleModel};
use clarity_core::Error;
use clarity_harness::experiments::perceivability::{self, Model};
use clarity_harness::{run_experiment, RunOutput, ScenarioConfig};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Verdict + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(started: Instant, budget_s: f64) -> Result<f64, String> {
    let s = started.elapsed().as_secs_f64();
    ensure(s < budget_s, || format!("took {s:.2} s, budget {budget_s} s"))?;
    Ok(s)
}

fn cv(q: f64) -> ClarityValue {
    ClarityValue::new(q).unwrap()
}

fn random_spd(rng: &mut StdRng, n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let d = DVector::from_fn(n, |_, _| rng.random_range(0.05..2.0));
    &l * l.transpose() + DMatrix::from_diagonal(&d)
}

/// Classic fourth-order Runge-Kutta step on a flat state vector.
fn rk4(f: &dyn Fn(&[f64]) -> Vec<f64>, y: &[f64], h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
    let k1 = f(y);
    let k2 = f(&add(y, &k1, h / 2.0));
    let k3 = f(&add(y, &k2, h / 2.0));
    let k4 = f(&add(y, &k3, h));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Scalar clarity ODE, written out independently of the library.
fn clarity_ode(c: f64, r: f64, q_noise: f64) -> impl Fn(&[f64]) -> Vec<f64> {
    move |y: &[f64]| vec![c * c / r * (1.0 - y[0]).powi(2) - q_noise * y[0] * y[0]]
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let b = GaussianBelief::new(DVector::zeros(n), random_spd(&mut rng, n)).map_err(|e| e.to_string())?;
        let direct = clarity_of_gaussian(&b).get();
        let via = clarity_from_entropy(entropy_of_gaussian(&b)).get();
        worst = worst.max((direct - via).abs() / direct);
    }
    let s = within_budget(started, 1.0)?;
    ensure(worst <= 1e-12, || format!("relative gap {worst:e} > 1e-12"))?;
    Ok(format!("1000 SPD covariances, worst relative gap {worst:.1e}, {s:.3} s"))
}

fn det_error(samples: &[DVector<f64>], estimate: &DVector<f64>) -> f64 {
    let n = estimate.len();
    let mut acc = DMatrix::zeros(n, n);
    for x in samples {
        let e = x - estimate;
        acc += &e * e.transpose();
    }
    (acc / samples.len() as f64).determinant()
}

fn criterion_2() -> Verdict {
    const N: usize = 1_000_000;
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(2);
    let mut notes = Vec::new();
    for n in [1usize, 2] {
        let cov = random_spd(&mut rng, n);
        let mean = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let l = cov.clone().cholesky().ok_or("covariance not SPD")?.l();
        let samples: Vec<DVector<f64>> = (0..N)
            .map(|_| &mean + &l * DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let empirical = det_error(&samples, &mean);
        let q = clarity_of_gaussian(&GaussianBelief::new(mean.clone(), cov).map_err(|e| e.to_string())?);
        let bound = error_bound_from_clarity(q);
        let rel = (empirical - bound).abs() / bound;
        ensure(rel <= 0.02, || format!("gaussian n={n}: det error {empirical} vs bound {bound} ({rel:.3})"))?;
        notes.push(format!("gaussian n={n} {:.2}%", 100.0 * rel));

        // uniform on a box, estimated by its mean: strictly above the bound
        let widths: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let samples: Vec<DVector<f64>> = (0..N)
            .map(|_| DVector::from_fn(n, |i, _| rng.random_range(0.0..widths[i])))
            .collect();
        let center = DVector::from_fn(n, |i, _| widths[i] / 2.0);
        let empirical = det_error(&samples, &center);
        let q = if n == 1 {
            clarity_of_uniform(&UniformBelief::new(0.0, widths[0]).map_err(|e| e.to_string())?)
        } else {
            let h = widths.iter().map(|w| w.ln()).sum::<f64>();
            clarity_from_entropy(Entropy::new(h, n).map_err(|e| e.to_string())?)
        };
        let bound = error_bound_from_clarity(q);
        ensure(empirical > bound * 1.02, || format!("uniform n={n}: det error {empirical} not above bound {bound}"))?;
        notes.push(format!("uniform n={n} exceeds by {:.0}%", 100.0 * (empirical / bound - 1.0)));
    }
    let s = within_budget(started, 30.0)?;
    Ok(format!("{}, {s:.1} s", notes.join(", ")))
}

fn criterion_3() -> Verdict {
    let started = Instant::now();
    let dt = 0.01;
    let steps = 40_000;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for c in [0.5, 1.0, 2.0] {
        for r in [1.0, 20.0] {
            for q_noise in [1e-3, 1e-1] {
                for q0 in [0.0, 0.5, 0.95] {
                    let f = clarity_ode(c, r, q_noise);
                    let mut y = vec![q0];
                    for k in 1..=steps {
                        y = rk4(&f, &y, dt);
                        let exact = closed_form_clarity(k as f64 * dt, cv(q0), c, r, q_noise).map_err(|e| e.to_string())?;
                        worst = worst.max((exact.get() - y[0]).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    let s = within_budget(started, 10.0)?;
    ensure(worst <= 1e-6, || format!("max deviation {worst:e} > 1e-6"))?;
    Ok(format!("{cases} parameter sets over [0, 400] s, max deviation {worst:.1e}, {s:.2} s"))
}

/// `q(t)` from the variance of a scalar Kalman filter started from an
/// uninformative prior: `P(t) = s coth(κ t)`, `s = √(QR)/C`, `κ = C√(Q/R)`.
fn coth_clarity(t: f64, c: f64, r: f64, q_noise: f64) -> f64 {
    let s = (q_noise * r).sqrt() / c;
    let kappa = c * (q_noise / r).sqrt();
    1.0 / (1.0 + s / (kappa * t).tanh())
}

fn criterion_4(e1: &RunOutput) -> Verdict {
    let oracle = |a: f64, b: f64| coth_clarity(b, 1.0, 20.0, 1e-3) / coth_clarity(a, 1.0, 20.0, 1e-3) - 1.0;
    let (g1, g2) = (oracle(10.0, 20.0), oracle(160.0, 320.0));
    let (r1, r2) = (e1.results["gain_10_20"].as_f64().unwrap(), e1.results["gain_160_320"].as_f64().unwrap());
    ensure((r1 - g1).abs() < 1e-9 && (r2 - g2).abs() < 1e-9, || {
        format!("experiment gains {r1}, {r2} disagree with variance oracle {g1}, {g2}")
    })?;
    ensure((100.0 * r1 - 49.7).abs() <= 0.3, || format!("gain over [10, 20] s is {:.2}%", 100.0 * r1))?;
    ensure((100.0 * r2 - 2.6).abs() <= 0.3, || format!("gain over [160, 320] s is {:.2}%", 100.0 * r2))?;
    Ok(format!("gains {:.2}% and {:.2}%", 100.0 * r1, 100.0 * r2))
}

fn criterion_5(e1: &RunOutput, seconds: f64) -> Verdict {
    ensure(seconds < 5.0, || format!("E1 took {seconds:.2} s, budget 5 s"))?;
    let t_star = e1.results["t_star"].as_f64().unwrap();
    let q_inf = e1.results["q_inf"].as_f64().unwrap();
    // dense scan of the variance oracle
    let ratio = |t: f64| coth_clarity(t, 1.0, 20.0, 1e-3) / (36_000.0 + 200.0 * t);
    let oracle = (1..=400_000).map(|i| i as f64 * 1e-3).fold((0.0, 0.0), |best, t| {
        let r = ratio(t);
        if r > best.1 {
            (t, r)
        } else {
            best
        }
    });
    ensure((t_star - oracle.0).abs() < 2e-3, || format!("T* = {t_star} but dense scan gives {}", oracle.0))?;
    ensure((t_star - 57.4).abs() <= 1.0, || format!("T* = {t_star:.3} s"))?;
    let k = 1.0 / (1e-3f64 * 20.0).sqrt();
    ensure((q_inf - k / (k + 1.0)).abs() < 1e-12, || format!("q_inf {q_inf} vs k/(k+1)"))?;
    ensure((q_inf - 0.8761).abs() <= 1e-3, || format!("q_inf = {q_inf}"))?;
    Ok(format!("T* = {t_star:.3} s, q_inf = {q_inf:.4}, {seconds:.2} s"))
}

fn criterion_6() -> Verdict {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = 2 + i % 2;
        let m = rng.random_range(1..=n);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
        let qn = random_spd(&mut rng, n) * 0.1;
        let c = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let r = random_spd(&mut rng, m);
        let p0 = random_spd(&mut rng, n);

        let (c2, r2) = (c.clone(), r.clone());
        let env = MatrixEnvironment::new(a.clone(), qn.clone(), Arc::new(move |_| c2.clone()), Arc::new(move |_| r2.clone()))
            .map_err(|e| e.to_string())?;
        let rate = matrix_clarity_rate(&CovarianceState::new(p0.clone()).map_err(|e| e.to_string())?, &env, &[0.0])
            .map_err(|e| e.to_string())?;

        // independent Riccati right-hand side on a flattened matrix
        let r_inv = r.clone().try_inverse().ok_or("R not invertible")?;
        let riccati = |y: &[f64]| {
            let p = DMatrix::from_column_slice(n, n, y);
            let dp = &a * &p + &p * a.transpose() + &qn - &p * c.transpose() * &r_inv * &c * &p;
            dp.as_slice().to_vec()
        };
        let clarity = |y: &[f64]| 1.0 / (1.0 + DMatrix::from_column_slice(n, n, y).determinant());
        let h = 1e-4;
        let fwd = rk4(&riccati, p0.as_slice(), h);
        let bwd = rk4(&riccati, p0.as_slice(), -h);
        let fd = (clarity(&fwd) - clarity(&bwd)) / (2.0 * h);
        worst = worst.max((fd - rate).abs() / rate.abs());
    }
    let s = within_budget(started, 10.0)?;
    ensure(worst <= 1e-5, || format!("worst relative gap {worst:e} > 1e-5"))?;
    Ok(format!("100 instances (n = 2, 3), worst relative gap {worst:.1e}, {s:.2} s"))
}

fn criterion_7(e3_cfg: &ScenarioConfig) -> Verdict {
    let started = Instant::now();
    let grid = perceivability::grid(e3_cfg, Model::SingleIntegrator).map_err(|e| e.to_string())?;
    let horizon = e3_cfg.real("target.horizon");
    let scheme = perceivability::scheme(e3_cfg);

    let frozen = VehicleModel::frozen(2, ControlBox::symmetric(2.0, 2).map_err(|e| e.to_string())?);
    let sys = AugmentedSystem::new(frozen, &SensingFootprint::uniform(0.0, 1.0).map_err(|e| e.to_string())?, 0.0)
        .map_err(|e| e.to_string())?;
    let vf = solve_hjb(&sys, &grid, horizon, &scheme).map_err(|e| e.to_string())?;
    let frozen_gap = (0..grid.len())
        .map(|i| (vf.initial()[i] - grid.point(i)[2]).abs())
        .fold(0.0, f64::max);
    ensure(frozen_gap == 0.0, || format!("frozen system: V differs from q by {frozen_gap:e}"))?;

    let flow = FlowField::shear(e3_cfg.real("flow.shear"), e3_cfg.real("flow.drift_y"));
    let si = single_integrator_2d(flow, e3_cfg.real("si.u_max")).map_err(|e| e.to_string())?;
    let always = SensingFootprint::uniform(1.0, 1.0).map_err(|e| e.to_string())?;
    let sys = AugmentedSystem::new(si, &always, 1e-3).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for (name, scheme) in [("configured", scheme), ("default", SchemeConfig::default())] {
        let vf = solve_hjb(&sys, &grid, horizon, &scheme).map_err(|e| e.to_string())?;
        let nq = grid.clarity_axis().nodes;
        // fine RK4 of the scalar ODE per q node
        let f = clarity_ode(1.0, 1.0, 1e-3);
        let oracle: Vec<f64> = (0..nq)
            .map(|k| {
                let mut y = vec![grid.clarity_axis().coord(k)];
                for _ in 0..10_000 {
                    y = rk4(&f, &y, horizon / 10_000.0);
                }
                y[0]
            })
            .collect();
        let gap = vf.initial().iter().enumerate().map(|(i, v)| (v - oracle[i % nq]).abs()).fold(0.0, f64::max);
        ensure(gap <= 1e-2, || format!("always-sensing ({name} scheme): max error {gap:.2e} > 1e-2"))?;
        notes.push(format!("{name} scheme {gap:.1e}"));
    }
    let s = within_budget(started, 120.0)?;
    Ok(format!("frozen V = q exactly; always-sensing max error {}; {s:.1} s", notes.join(", ")))
}

/// Columns of a CSV written by the harness, keyed by header name.
fn read_csv(path: &Path) -> BTreeMap<String, Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for line in lines {
        for (c, v) in cols.iter_mut().zip(line.split(',')) {
            c.push(v.parse().unwrap());
        }
    }
    header.into_iter().zip(cols).collect()
}

fn criterion_8(e3: &RunOutput, seconds: f64) -> Verdict {
    ensure(seconds < 900.0, || format!("E3 took {seconds:.0} s, budget 900 s"))?;
    let horizon = e3.results["horizon"].as_f64().unwrap();
    let q_star = e3.results["q_star"].as_f64().unwrap();
    let mut finals = Vec::new();
    for tag in ["single_integrator", "dubins_boat"] {
        let s = &e3.results[tag];
        let cols = read_csv(&e3.dir.join(format!("rollout_{tag}.csv")));
        let (t, q) = (&cols["t"], &cols["q"]);
        ensure((t.last().unwrap() - horizon).abs() < 1e-9, || format!("{tag} rollout ends at {} s", t.last().unwrap()))?;
        let q_final = *q.last().unwrap();
        ensure((q_final - s["final_clarity"].as_f64().unwrap()).abs() < 1e-12, || format!("{tag}: CSV and summary disagree"))?;
        let (checked, passed) = (s["consistency"]["checked"].as_u64().unwrap(), s["consistency"]["passed"].as_u64().unwrap());
        ensure(checked >= 20 && passed == checked, || format!("{tag}: consistency {passed}/{checked}"))?;
        finals.push((q_final, checked));
    }
    ensure(finals[0].0 >= q_star, || format!("single integrator q(10) = {:.3} < {q_star}", finals[0].0))?;
    ensure(finals[1].0 < q_star, || format!("Dubins boat q(10) = {:.3} >= {q_star}", finals[1].0))?;
    Ok(format!(
        "q(10): single integrator {:.3}, Dubins boat {:.3}; consistency {}/{} and {}/{}; {seconds:.0} s",
        finals[0].0, finals[1].0, finals[0].1, finals[0].1, finals[1].1, finals[1].1
    ))
}

fn criterion_9(e2: &RunOutput, cfg: &ScenarioConfig, seconds: f64) -> Verdict {
    ensure(seconds < 300.0, || format!("E2 took {seconds:.0} s, budget 300 s"))?;
    let tol = cfg.real("metric.tolerance");
    let series = |name: &str| read_csv(&e2.dir.join(format!("coverage_{name}.csv")));
    let first_within = |c: &BTreeMap<String, Vec<f64>>| {
        c["t"].iter().zip(&c["mean_error"]).find(|(_, e)| e.abs() <= tol).map(|(t, _)| *t)
    };
    let overshoot = |c: &BTreeMap<String, Vec<f64>>| c["mean_error"].iter().copied().fold(0.0, f64::max);
    let (uniform, clarity, greedy) = (series("uniform"), series("clarity"), series("greedy"));
    let (tu, tc) = (first_within(&uniform), first_within(&clarity));
    let tc = tc.ok_or("clarity-ergodic never reaches the tolerance")?;
    ensure(tu.is_none_or(|tu| tc <= tu), || format!("clarity-ergodic at {tc} s, uniform at {tu:?} s"))?;
    let (ou, oc) = (overshoot(&uniform), overshoot(&clarity));
    ensure(oc < ou, || format!("overshoot clarity {oc:.4} vs uniform {ou:.4}"))?;

    // greedy: every decrease before all targets are met is bounded by pure decay, Q dt mean(q²) ≤ Q dt
    let until = e2.results["greedy"]["targets_met_at"].as_f64().ok_or("greedy never meets its targets")?;
    let (dt, q_noise) = (cfg.real("sim.dt"), cfg.real("channel.Q"));
    let (t, e) = (&greedy["t"], &greedy["mean_error"]);
    let worst_drop = (1..t.len())
        .take_while(|&k| t[k] <= until)
        .map(|k| e[k - 1] - e[k])
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(worst_drop <= q_noise * dt + 1e-12, || format!("greedy error drops by {worst_drop:e} in one step"))?;
    ensure(e2.results["greedy_monotone"].as_bool() == Some(true), || "summary flags greedy as non-monotone".into())?;
    Ok(format!(
        "|mean error| <= {tol}: clarity {tc:.2} s, uniform {}; overshoot {oc:.3} vs {ou:.3}; greedy monotone to {until:.1} s; {seconds:.1} s",
        tu.map_or("never".into(), |t| format!("{t:.2} s"))
    ))
}

fn qp_brute_force(rng: &mut StdRng) -> Verdict {
    const N: usize = 400;
    let (lo, hi) = ([0.0, -2.0], [19.62, 2.0]);
    let controls = ControlBox::new(lo.to_vec(), hi.to_vec()).map_err(|e| e.to_string())?;
    let cell = [(hi[0] - lo[0]) / (N - 1) as f64, (hi[1] - lo[1]) / (N - 1) as f64];
    let diag = cell[0].hypot(cell[1]);
    let (mut feasible, mut infeasible, mut worst) = (0, 0, 0.0f64);
    for _ in 0..1000 {
        let spec = QpSpec {
            u_nom: vec![rng.random_range(-2.0..22.0), rng.random_range(-3.0..3.0)],
            a: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            b: rng.random_range(-10.0..5.0),
            controls: controls.clone(),
        };
        let slack = |u: &[f64]| spec.a[0] * u[0] + spec.a[1] * u[1] - spec.b;
        let cost = |u: &[f64]| (u[0] - spec.u_nom[0]).powi(2) + (u[1] - spec.u_nom[1]).powi(2);
        let mut best: Option<([f64; 2], f64)> = None;
        let mut max_slack = f64::NEG_INFINITY;
        for i in 0..N {
            for j in 0..N {
                let u = [lo[0] + i as f64 * cell[0], lo[1] + j as f64 * cell[1]];
                max_slack = max_slack.max(slack(&u));
                if slack(&u) >= 0.0 && best.is_none_or(|(_, c)| cost(&u) < c) {
                    best = Some((u, cost(&u)));
                }
            }
        }
        match (qp_filter(&spec), best) {
            (Ok(sol), Some((ug, cg))) => {
                ensure(controls.contains(&sol.u) && slack(&sol.u) >= -1e-9, || format!("infeasible output {:?}", sol.u))?;
                let c = cost(&sol.u);
                ensure(c <= cg + 1e-9, || format!("filter cost {c} above grid optimum {cg}"))?;
                // the grid optimum is within resolution in cost, and strong
                // convexity ties its distance to the cost gap
                let d = 2.0 * diag;
                ensure(cg - c <= 2.0 * d * c.sqrt() + d * d, || format!("filter cost {c} vs grid {cg}"))?;
                let dist = (sol.u[0] - ug[0]).hypot(sol.u[1] - ug[1]);
                ensure(dist * dist <= cg - c + 1e-9, || format!("filter {:?} vs grid {ug:?}", sol.u))?;
                worst = worst.max(cg - c);
                feasible += 1;
            }
            (Ok(sol), None) => {
                // feasible set thinner than the grid
                ensure(max_slack > -diag * spec.a[0].hypot(spec.a[1]), || format!("grid found nothing near {:?}", sol.u))?;
                feasible += 1;
            }
            (Err(Error::Infeasible { .. }), None) => infeasible += 1,
            (Err(Error::Infeasible { .. }), Some((ug, _))) => return Err(format!("filter infeasible, grid found {ug:?}")),
            (Err(e), _) => return Err(e.to_string()),
        }
    }
    Ok(format!(
        "QP matches a {N}x{N} grid on {feasible} feasible and {infeasible} infeasible instances (worst cost gap {worst:.1e})"
    ))
}

fn criterion_10(e4: &RunOutput) -> Verdict {
    let mut notes = Vec::new();
    for (mode, should_violate) in [("filtered", false), ("nominal", true)] {
        let cols = read_csv(&e4.dir.join(format!("landing_{mode}.csv")));
        // recompute h from the logged state
        let min_h = cols["x2"]
            .iter()
            .zip(&cols["q"])
            .map(|(x2, q)| q - 4.0 / (4.0 + x2 * x2))
            .fold(f64::INFINITY, f64::min);
        let reported = e4.results[mode]["min_h"].as_f64().unwrap();
        ensure((min_h - reported).abs() < 1e-12, || format!("{mode}: min h {min_h} vs summary {reported}"))?;
        if should_violate {
            ensure(min_h < 0.0, || format!("nominal run never violates (min h = {min_h})"))?;
        } else {
            ensure(min_h >= -1e-3, || format!("filtered run reaches h = {min_h}"))?;
        }
        notes.push(format!("min h {mode} {min_h:.2e}"));
    }
    notes.push(qp_brute_force(&mut StdRng::seed_from_u64(10))?);
    let median = e4.results["filter_latency"]["median_ms"].as_f64().unwrap();
    notes.push(if median < 1.0 {
        format!("median filter step {median:.4} ms")
    } else {
        format!("median filter step {median:.4} ms exceeds 1 ms (reported only)")
    });
    Ok(notes.join("; "))
}

fn data_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "bin" | "hdr")))
        .collect();
    files.sort();
    files
}

fn criterion_11(pairs: &[(String, PathBuf, PathBuf)]) -> Verdict {
    let mut compared = 0;
    for (name, a, b) in pairs {
        let (fa, fb) = (data_files(a), data_files(b));
        let names = |fs: &[PathBuf]| fs.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
        ensure(names(&fa) == names(&fb), || format!("{name}: reruns wrote different file sets"))?;
        ensure(fa.iter().any(|p| p.extension().is_some_and(|e| e == "csv")), || format!("{name}: no CSV output"))?;
        for (x, y) in fa.iter().zip(&fb) {
            ensure(std::fs::read(x).unwrap() == std::fs::read(y).unwrap(), || {
                format!("{name}: {} differs between reruns", x.file_name().unwrap().to_string_lossy())
            })?;
            compared += 1;
        }
    }
    Ok(format!("{compared} data files byte-identical across reruns of {} scenarios", pairs.len()))
}

fn scenario(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.cfg"));
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn run_into(cfg: &ScenarioConfig, dir: &Path) -> (RunOutput, f64) {
    let mut cfg = cfg.clone();
    cfg.set_output_dir(dir).unwrap();
    let started = Instant::now();
    let out = run_experiment(&cfg).unwrap_or_else(|e| panic!("{}: {e:#}", cfg.experiment()));
    (out, started.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let names = ["e1", "e2", "e3", "e4"];
    let configs: Vec<ScenarioConfig> = names.iter().map(|n| scenario(n)).collect();
    let mut first = Vec::new();
    let mut pairs = Vec::new();
    for (name, cfg) in names.iter().zip(&configs) {
        let (a, b) = (tmp.path().join(format!("{name}_a")), tmp.path().join(format!("{name}_b")));
        first.push(run_into(cfg, &a));
        run_into(cfg, &b);
        pairs.push((name.to_string(), a, b));
    }
    let [(e1, t1), (e2, t2), (e3, t3), (e4, _)] = <[_; 4]>::try_from(first).ok().unwrap();

    let criteria: Vec<Criterion> = vec![
        ("clarity algebra", Box::new(criterion_1)),
        ("estimation-error bound equality case", Box::new(criterion_2)),
        ("closed form vs RK4", Box::new(criterion_3)),
        ("clarity gain percentages", Box::new(|| criterion_4(&e1))),
        ("energy optimum", Box::new(|| criterion_5(&e1, t1))),
        ("matrix clarity rate", Box::new(criterion_6)),
        ("HJB sanity oracles", Box::new(|| criterion_7(&configs[2]))),
        ("E3 perceivability", Box::new(|| criterion_8(&e3, t3))),
        ("E2 coverage ordering", Box::new(|| criterion_9(&e2, &configs[1], t2))),
        ("E4 landing safety", Box::new(|| criterion_10(&e4))),
        ("determinism", Box::new(|| criterion_11(&pairs))),
    ];
    let mut failures = 0;
    for (i, (title, check)) in criteria.into_iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {} ({title}): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {} ({title}): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
