//! Perceivability through HJB reachability of the clarity-augmented system.
//!
//! [`solve_hjb`] computes `V(t, x, q)`, the largest clarity reachable at the
//! horizon from `(x, q)` at time `t`. The perceivability domain is the
//! superlevel set `{V(0, ·) ≥ q*}` and the optimal feedback maximises
//! `∂V/∂x · f(x, u)` over the control box.

mod grid;
mod solver;

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};


pub use grid::{Axis, Grid};
pub use solver::{plan_time_steps, solve_hjb, Dissipation, SchemeConfig, TimeIntegrator, TimeSlice, ValueFunction};

use crate::info::ClarityValue;
use crate::models::AugmentedSystem;
use crate::ode::{rk4_step, Rk4Workspace};
use crate::{Error, Result};

/// Superlevel set `{(x₀, q₀) : V(0, x₀, q₀) ≥ q*}` on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceivabilityDomain {
    pub q_star: f64,
    pub members: Vec<bool>,
}

impl PerceivabilityDomain {
    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains_node(&self, idx: usize) -> bool {
        self.members[idx]
    }

    /// Node-wise inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.members.len() == other.members.len() && self.members.iter().zip(&other.members).all(|(a, b)| !a || *b)
    }
}

pub fn perceivability_domain(vf: &ValueFunction, q_star: f64) -> PerceivabilityDomain {
    PerceivabilityDomain {
        q_star,
        members: vf.initial().iter().map(|&v| v >= q_star).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perceivability {
    pub perceivable: bool,
    /// `V(0, x₀, q₀) - q*`.
    pub margin: f64,
}

/// Whether the target clarity `q_star` is reachable by the horizon from
/// `(x0, q0)`, according to the interpolated value function.
pub fn is_perceivable(vf: &ValueFunction, x0: &[f64], q0: f64, q_star: f64) -> Result<Perceivability> {
    let margin = vf.value_at(x0, q0)? - q_star;
    Ok(Perceivability {
        perceivable: margin >= 0.0,
        margin,
    })
}

static MISSING_SLICE_WARNED: AtomicBool = AtomicBool::new(false);

/// Central-difference `∂V/∂x` of `values` at `(x, q)`; one-sided at the
/// edges of non-periodic axes.
pub fn state_gradient(grid: &Grid, values: &[f64], x: &[f64], q: f64) -> Result<Vec<f64>> {
    let n = grid.state_dims();
    let mut p = x.to_vec();
    p.push(q.clamp(0.0, 1.0));
    if !grid.contains(&p) {
        return Err(Error::OutOfDomain);
    }
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let axis = grid.axes()[i];
        let h = axis.spacing();
        let mut hi = p.clone();
        let mut lo = p.clone();
        hi[i] += h;
        lo[i] -= h;
        if !axis.periodic {
            hi[i] = hi[i].min(axis.max);
            lo[i] = lo[i].max(axis.min);
        }
        let span = hi[i] - lo[i];
        if span > 0.0 {
            grad[i] = (grid.interpolate(values, &hi)? - grid.interpolate(values, &lo)?) / span;
        }
    }
    Ok(grad)
}

/// Bang-bang maximiser of `p · G(x) u` over the control box; channels with
/// zero switching coefficient get the box midpoint.
pub fn maximizing_control(sys: &AugmentedSystem, x: &[f64], grad: &[f64]) -> Vec<f64> {
    let n = sys.state_dim();
    let controls = sys.vehicle.controls();
    let m = controls.dim();
    let mut g = vec![0.0; n * m];
    sys.vehicle.input_matrix(x, &mut g);
    (0..m)
        .map(|j| {
            let s: f64 = (0..n).map(|i| grad[i] * g[i * m + j]).sum();
            if s > 0.0 {
                controls.upper()[j]
            } else if s < 0.0 {
                controls.lower()[j]
            } else {
                0.5 * (controls.lower()[j] + controls.upper()[j])
            }
        })
        .collect()
}

/// `π(t, x, q) = argmax_u ∂V/∂x · f(x, u)`, using the stored slice nearest
/// to `t` (or the `t = 0` slice if none were kept).
pub fn optimal_control(vf: &ValueFunction, t: f64, x: &[f64], q: f64, sys: &AugmentedSystem) -> Result<Vec<f64>> {
    if !vf.has_time_slices() && t > 0.0 && !MISSING_SLICE_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("value function has no intermediate time slices; using t = 0 for control extraction");
    }
    let slice = vf.slice_near(t);
    let grad = state_gradient(&vf.grid, &slice.values, x, q)?;
    Ok(maximizing_control(sys, x, &grad))
}

/// Closed-loop solution of the augmented system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Vehicle states, unwrapped.
    pub states: Vec<Vec<f64>>,
    pub clarity: Vec<f64>,
    /// `controls[i]` is held over `[times[i], times[i + 1])`.
    pub controls: Vec<Vec<f64>>,
    /// Number of steps after which `q` had to be clamped into `[0, 1]`.
    pub clamp_events: usize,
    /// The trajectory left the grid and was truncated.
    pub exited: bool,
}

impl Trajectory {
    pub fn final_clarity(&self) -> f64 {
        *self.clarity.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Integrates `[ẋ; q̇] = [f(x, u); g(x, q)]` with RK4 and zero-order-hold
/// controls `u = controller(t, x, q)` over `[0, horizon]`.
///
/// With `bounds`, the rollout stops (flagging `exited`) as soon as the
/// vehicle state leaves the grid's non-periodic extent.
pub fn rollout<C>(
    sys: &AugmentedSystem,
    controller: C,
    x0: &[f64],
    q0: ClarityValue,
    horizon: f64,
    dt: f64,
    bounds: Option<&Grid>,
) -> Result<Trajectory>
where
    C: FnMut(f64, &[f64], f64) -> Result<Vec<f64>>,
{
    rollout_until(sys, controller, x0, q0, horizon, dt, |x| bounds.is_some_and(|g| !g.contains_state(x)))
}

/// [`rollout`] with a custom stopping rule: integration ends (flagging
/// `exited`) after the first step whose state satisfies `stop`.
pub fn rollout_until<C, S>(
    sys: &AugmentedSystem,
    mut controller: C,
    x0: &[f64],
    q0: ClarityValue,
    horizon: f64,
    dt: f64,
    mut stop: S,
) -> Result<Trajectory>
where
    C: FnMut(f64, &[f64], f64) -> Result<Vec<f64>>,
    S: FnMut(&[f64]) -> bool,
{
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::UnsupportedParameters(alloc::format!(
            "rollout needs dt > 0 and horizon > 0 (dt = {dt}, horizon = {horizon})"
        )));
    }
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(alloc::format!("x0 has {} entries, vehicle has {n} states", x0.len())));
    }
    let times = crate::ode::step_times(0.0, horizon, dt);
    let mut y: Vec<f64> = x0.iter().copied().chain([q0.get()]).collect();
    let mut ws = Rk4Workspace::new(n + 1);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        clarity: vec![q0.get()],
        controls: Vec::new(),
        clamp_events: 0,
        exited: false,
    };
    let mut fx = vec![0.0; n];
    for w in times.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let u = controller(t, &y[..n], y[n])?;
        if !sys.vehicle.controls().contains(&u) {
            return Err(Error::RejectedInput(u));
        }
        let mut rate = |_t: f64, s: &[f64], ds: &mut [f64]| {
            sys.vehicle.dynamics(&s[..n], &u, &mut fx);
            ds[..n].copy_from_slice(&fx);
            ds[n] = sys.clarity_rate(&s[..n], s[n]);
        };
        rk4_step(&mut rate, t, &mut y, h, &mut ws);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t });
        }
        if !(0.0..=1.0).contains(&y[n]) {
            log::debug!("clarity {} clamped at t = {}", y[n], w[1]);
            y[n] = y[n].clamp(0.0, 1.0);
            traj.clamp_events += 1;
        }
        traj.times.push(w[1]);
        traj.states.push(y[..n].to_vec());
        traj.clarity.push(y[n]);
        traj.controls.push(u);
        if stop(&y[..n]) {
            traj.exited = true;
            break;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests;
