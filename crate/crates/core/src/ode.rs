//! Classical fixed-step fourth-order Runge-Kutta.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Sampled solution of an ODE: `states[i]` is the state at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdeTrajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Scratch buffers for [`rk4_step`], so inner loops don't allocate.
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// One RK4 step of `ẏ = rate(t, y)`, in place.
pub fn rk4_step<F>(rate: &mut F, t: f64, y: &mut [f64], dt: f64, ws: &mut Rk4Workspace)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    rate(t, y, &mut ws.k1);
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * dt * ws.k1[i];
    }
    rate(t + 0.5 * dt, &ws.tmp, &mut ws.k2);
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * dt * ws.k2[i];
    }
    rate(t + 0.5 * dt, &ws.tmp, &mut ws.k3);
    for i in 0..n {
        ws.tmp[i] = y[i] + dt * ws.k3[i];
    }
    rate(t + dt, &ws.tmp, &mut ws.k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
}

/// Step boundaries `t0, t0 + dt, …, t1`; the last step is shortened to land
/// exactly on `t1`.
pub fn step_times(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let span = t1 - t0;
    let full = (span / dt).floor() as usize;
    let mut times: Vec<f64> = (0..=full).map(|i| t0 + i as f64 * dt).collect();
    let last = *times.last().unwrap();
    if t1 - last > 1e-9 * dt {
        times.push(t1);
    } else {
        *times.last_mut().unwrap() = t1;
    }
    times
}

/// Integrates `ẏ = rate(t, y)` from `state0` over `[t0, t1]` with RK4.
pub fn integrate_fixed_step<F>(mut rate: F, state0: &[f64], t0: f64, t1: f64, dt: f64) -> Result<OdeTrajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_with_projection(&mut rate, |_| {}, state0, t0, t1, dt)
}

/// As [`integrate_fixed_step`], applying `project` to the state after every
/// step (e.g. symmetrisation of a covariance).
pub fn integrate_with_projection<F, P>(
    rate: &mut F,
    mut project: P,
    state0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<OdeTrajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    if !(dt > 0.0) || !(t1 > t0) {
        return Err(Error::UnsupportedParameters(alloc::format!(
            "integration needs dt > 0 and t1 > t0 (dt = {dt}, t0 = {t0}, t1 = {t1})"
        )));
    }
    let times = step_times(t0, t1, dt);
    let mut ws = Rk4Workspace::new(state0.len());
    let mut y = state0.to_vec();
    let mut states = Vec::with_capacity(times.len());
    states.push(y.clone());
    for w in times.windows(2) {
        rk4_step(rate, w[0], &mut y, w[1] - w[0], &mut ws);
        project(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t: w[0] });
        }
        states.push(y.clone());
    }
    Ok(OdeTrajectory { times, states })
}
