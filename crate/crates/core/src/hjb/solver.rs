//! Backward HJB sweep for the maximal terminal clarity
//!
//! ```text
//! ∂V/∂t + max_u ∂V/∂x · f(x, u) + ∂V/∂q g(x, q) = 0,   V(T, x, q) = q.
//! ```
//!
//! Written in time-to-go `τ = T - t` this is `V_τ = H(x, q, ∇V)`, which is
//! advanced explicitly with a Lax-Friedrichs numerical Hamiltonian over the
//! vehicle-state axes and an upwind difference over the clarity axis (the
//! sign of `g` is known at every node, so that is Lax-Friedrichs with exact
//! local dissipation along `q`).

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::grid::Grid;
use crate::belief::clarity_rate;
use crate::models::AugmentedSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeIntegrator {
    /// Forward Euler.
    Euler,
    /// Two-stage TVD Runge-Kutta (Heun).
    TvdRk2,
}

/// How the Lax-Friedrichs dissipation coefficients are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dissipation {
    /// `α_i = max over the grid of |∂H/∂p_i|`.
    Global,
    /// `α_i(x) = max over U of |f_i(x, u)|`, evaluated per node.
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub cfl: f64,
    pub integrator: TimeIntegrator,
    pub dissipation: Dissipation,
    /// Upper bound on the time step; reduced to satisfy the CFL condition.
    pub max_dt: Option<f64>,
    /// Keep intermediate time slices for time-varying control extraction.
    pub store_slices: bool,
    /// Slice stride in steps; `None` picks `max(1, ⌊N_t / 50⌋)`.
    pub slice_stride: Option<usize>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            integrator: TimeIntegrator::Euler,
            dissipation: Dissipation::Global,
            max_dt: None,
            store_slices: true,
            slice_stride: None,
        }
    }
}

/// Value function at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Solution of the HJB sweep. `slices` are sorted by time and always start
/// with `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub grid: Grid,
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub slices: Vec<TimeSlice>,
}

impl ValueFunction {
    pub fn initial(&self) -> &[f64] {
        &self.slices[0].values
    }

    /// Stored slice whose time is nearest to `t`.
    pub fn slice_near(&self, t: f64) -> &TimeSlice {
        self.slices
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("at least the t = 0 slice is stored")
    }

    pub fn has_time_slices(&self) -> bool {
        self.slices.len() > 1
    }

    /// `V(0, x, q)` by multilinear interpolation.
    pub fn value_at(&self, x: &[f64], q: f64) -> Result<f64> {
        let mut p = x.to_vec();
        p.push(q);
        self.grid.interpolate(self.initial(), &p)
    }
}

/// Per-node dynamics data, computed once before time stepping.
struct NodeData {
    n: usize,
    m: usize,
    drift: Vec<f64>,
    input: Vec<f64>,
    info: Vec<f64>,
    /// Local `max_u |f_i(x, u)|`, per node and state axis.
    alpha: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl NodeData {
    fn new(sys: &AugmentedSystem, grid: &Grid) -> Self {
        let n = grid.state_dims();
        let m = sys.vehicle.control_dim();
        let ns = grid.spatial_len();
        let nq = grid.clarity_axis().nodes;
        let mut drift = vec![0.0; ns * n];
        let mut input = vec![0.0; ns * n * m];
        let mut info = vec![0.0; ns];
        let mut alpha = vec![0.0; ns * n];
        let lower = sys.vehicle.controls().lower().to_vec();
        let upper = sys.vehicle.controls().upper().to_vec();
        for s in 0..ns {
            let p = grid.point(s * nq);
            let x = &p[..n];
            sys.vehicle.drift(x, &mut drift[s * n..(s + 1) * n]);
            sys.vehicle.input_matrix(x, &mut input[s * n * m..(s + 1) * n * m]);
            info[s] = sys.channel.info_rate(x);
            for i in 0..n {
                let (mut hi, mut lo) = (drift[s * n + i], drift[s * n + i]);
                for j in 0..m {
                    let gij = input[s * n * m + i * m + j];
                    hi += (gij * lower[j]).max(gij * upper[j]);
                    lo += (gij * lower[j]).min(gij * upper[j]);
                }
                alpha[s * n + i] = hi.abs().max(lo.abs());
            }
        }
        Self {
            n,
            m,
            drift,
            input,
            info,
            alpha,
            lower,
            upper,
        }
    }
}

/// Precomputed stencil geometry and dissipation for the sweep.
struct Operator<'a> {
    grid: &'a Grid,
    data: NodeData,
    process_noise: f64,
    dissipation: Dissipation,
    global_alpha: Vec<f64>,
    inv_h: Vec<f64>,
}

impl<'a> Operator<'a> {
    fn new(sys: &AugmentedSystem, grid: &'a Grid, dissipation: Dissipation) -> Self {
        let data = NodeData::new(sys, grid);
        let n = data.n;
        let mut global_alpha = vec![0.0f64; n];
        for s in 0..grid.spatial_len() {
            for i in 0..n {
                global_alpha[i] = global_alpha[i].max(data.alpha[s * n + i]);
            }
        }
        let inv_h = grid.axes().iter().map(|a| 1.0 / a.spacing()).collect();
        Self {
            grid,
            data,
            process_noise: sys.channel.process_noise(),
            dissipation,
            global_alpha,
            inv_h,
        }
    }

    fn alpha(&self, s: usize, i: usize) -> f64 {
        match self.dissipation {
            Dissipation::Global => self.global_alpha[i],
            Dissipation::Local => self.data.alpha[s * self.data.n + i],
        }
    }

    /// Largest stable step: `cfl / max_nodes(Σ α_i/Δx_i + |g|/Δq)`.
    fn stable_dt(&self, cfl: f64) -> f64 {
        let n = self.data.n;
        let nq = self.grid.clarity_axis().nodes;
        let qaxis = self.grid.clarity_axis();
        let mut worst = 0.0f64;
        for s in 0..self.grid.spatial_len() {
            let mut rate: f64 = (0..n).map(|i| self.alpha(s, i) * self.inv_h[i]).sum();
            let gmax = (0..nq)
                .map(|k| clarity_rate(qaxis.coord(k), self.data.info[s], self.process_noise).abs())
                .fold(0.0, f64::max);
            rate += gmax * self.inv_h[n];
            worst = worst.max(rate);
        }
        if worst == 0.0 {
            f64::INFINITY
        } else {
            cfl / worst
        }
    }

    /// Writes `H(V)` for every node of spatial block `s` into `out`.
    fn block(&self, s: usize, v: &[f64], out: &mut [f64]) {
        let grid = self.grid;
        let d = &self.data;
        let (n, m) = (d.n, d.m);
        let nq = grid.clarity_axis().nodes;
        let axes = grid.axes();
        let strides = grid.strides();
        let base = s * nq;

        let mut multi = [0usize; 8];
        grid.multi_index(base, &mut multi);
        // neighbour offsets along each state axis; None is a zero-gradient ghost node
        let mut left = [None::<isize>; 8];
        let mut right = [None::<isize>; 8];
        for i in 0..n {
            let (idx, nodes, stride) = (multi[i], axes[i].nodes, strides[i] as isize);
            left[i] = if idx > 0 {
                Some(-stride)
            } else if axes[i].periodic {
                Some((nodes as isize - 1) * stride)
            } else {
                None
            };
            right[i] = if idx + 1 < nodes {
                Some(stride)
            } else if axes[i].periodic {
                Some(-(nodes as isize - 1) * stride)
            } else {
                None
            };
        }

        let drift = &d.drift[s * n..(s + 1) * n];
        let input = &d.input[s * n * m..(s + 1) * n * m];
        let info = d.info[s];
        let inv_hq = self.inv_h[n];
        let mut p_avg = [0.0f64; 8];

        for k in 0..nq {
            let idx = base + k;
            let center = v[idx];
            let mut h = 0.0;
            for i in 0..n {
                let minus = left[i].map(|o| (center - v[(idx as isize + o) as usize]) * self.inv_h[i]);
                let plus = right[i].map(|o| (v[(idx as isize + o) as usize] - center) * self.inv_h[i]);
                // a missing neighbour contributes a zero one-sided difference,
                // which keeps the scheme monotone at the domain edge
                let (pm, pp) = (minus.unwrap_or(0.0), plus.unwrap_or(0.0));
                p_avg[i] = 0.5 * (pm + pp);
                h += 0.5 * self.alpha(s, i) * (pp - pm);
                h += p_avg[i] * drift[i];
            }
            for j in 0..m {
                let sj: f64 = (0..n).map(|i| p_avg[i] * input[i * m + j]).sum();
                h += (sj * d.lower[j]).max(sj * d.upper[j]);
            }
            let q = axes[n].coord(k);
            let g = clarity_rate(q, info, self.process_noise);
            if g > 0.0 && k + 1 < nq {
                h += g * (v[idx + 1] - center) * inv_hq;
            } else if g < 0.0 && k > 0 {
                h += g * (center - v[idx - 1]) * inv_hq;
            }
            out[k] = h;
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let nq = self.grid.clarity_axis().nodes;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.par_chunks_mut(nq)
                .enumerate()
                .for_each(|(s, chunk)| self.block(s, v, chunk));
        }
        #[cfg(not(feature = "parallel"))]
        for (s, chunk) in out.chunks_mut(nq).enumerate() {
            self.block(s, v, chunk);
        }
    }
}

/// Step count and size actually used for a given horizon.
pub fn plan_time_steps(stable_dt: f64, horizon: f64, max_dt: Option<f64>) -> (usize, f64) {
    let mut dt = stable_dt.min(horizon);
    if let Some(req) = max_dt {
        if req > stable_dt {
            log::warn!("requested HJB step {req} violates the CFL bound; reducing to {stable_dt}");
        } else {
            dt = req;
        }
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, horizon / steps as f64)
}

/// Solves the HJB terminal-value problem on `grid` over `[0, horizon]`.
pub fn solve_hjb(sys: &AugmentedSystem, grid: &Grid, horizon: f64, scheme: &SchemeConfig) -> Result<ValueFunction> {
    if !(horizon > 0.0) {
        return Err(Error::UnsupportedParameters(alloc::format!("horizon must be > 0, got {horizon}")));
    }
    if grid.state_dims() != sys.state_dim() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "grid has {} state axes, vehicle has {} states",
            grid.state_dims(),
            sys.state_dim()
        )));
    }
    if grid.dims() > 8 {
        return Err(Error::InvalidGrid("at most 8 axes are supported".into()));
    }
    let op = Operator::new(sys, grid, scheme.dissipation);
    let (steps, dt) = plan_time_steps(op.stable_dt(scheme.cfl), horizon, scheme.max_dt);
    let stride = scheme.slice_stride.unwrap_or((steps / 50).max(1)).max(1);
    log::debug!("HJB sweep: {} nodes, {steps} steps of {dt:.3e} s", grid.len());

    let nq = grid.clarity_axis().nodes;
    let qaxis = *grid.clarity_axis();
    let mut v: Vec<f64> = (0..grid.len()).map(|i| qaxis.coord(i % nq)).collect();
    let mut rate = vec![0.0; v.len()];
    let mut stage = match scheme.integrator {
        TimeIntegrator::Euler => Vec::new(),
        TimeIntegrator::TvdRk2 => vec![0.0; v.len()],
    };

    let mut slices = Vec::new();
    if scheme.store_slices {
        slices.push(TimeSlice {
            t: horizon,
            values: v.clone(),
        });
    }
    for step in 1..=steps {
        match scheme.integrator {
            TimeIntegrator::Euler => {
                op.apply(&v, &mut rate);
                v.iter_mut().zip(&rate).for_each(|(a, r)| *a += dt * r);
            }
            TimeIntegrator::TvdRk2 => {
                op.apply(&v, &mut rate);
                stage.iter_mut().zip(v.iter().zip(&rate)).for_each(|(s, (a, r))| *s = a + dt * r);
                op.apply(&stage, &mut rate);
                v.iter_mut()
                    .zip(stage.iter().zip(&rate))
                    .for_each(|(a, (s, r))| *a = 0.5 * (*a + s + dt * r));
            }
        }
        let t = horizon - step as f64 * dt;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::SolverDiverged { t });
        }
        if scheme.store_slices && (step % stride == 0 || step == steps) {
            slices.push(TimeSlice {
                t: t.max(0.0),
                values: v.clone(),
            });
        }
    }
    if !scheme.store_slices {
        slices.push(TimeSlice { t: 0.0, values: v });
    } else if let Some(last) = slices.last_mut() {
        last.t = 0.0;
    }
    slices.reverse();
    Ok(ValueFunction {
        grid: grid.clone(),
        horizon,
        dt,
        steps,
        slices,
    })
}
