//! Clarity maps over the unit square and coverage controllers driven by them.
//!
//! Every cell of a [`ClarityMap`] carries its own clarity, evolving with the
//! scalar Kalman clarity dynamics: it grows while the cell centre is inside
//! the robot's footprint and decays at `-Q q²` otherwise.

mod ergodic;

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

pub use ergodic::{ErgodicConfig, ErgodicController};

use crate::belief::{clarity_limit, clarity_rate, invert_closed_form};
use crate::info::ClarityValue;
use crate::{Error, Result};

/// Sensing parameters of a cell: gain `C` while sensed, noise `R`, process
/// noise `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellChannel {
    pub gain: f64,
    pub noise: f64,
    pub process_noise: f64,
}

impl CellChannel {
    pub fn info_rate(&self) -> f64 {
        self.gain * self.gain / self.noise
    }
}

/// Square grid of cells over `[0, 1]²`. Cell `i` has column `i % side` and
/// row `i / side`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClarityMap {
    side: usize,
    clarity: Vec<f64>,
    initial: Vec<f64>,
    target: Vec<f64>,
    channel: Vec<CellChannel>,
}

impl ClarityMap {
    /// Map with uniform initial clarity and channel, targets from `target_at`
    /// evaluated at cell centres.
    pub fn new(side: usize, q0: f64, channel: CellChannel, target_at: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidGrid("clarity map needs at least one cell".into()));
        }
        let n = side * side;
        let target = (0..n).map(|i| target_at(cell_center(side, i))).collect();
        Self::from_cells(side, vec![q0; n], target, vec![channel; n])
    }

    pub fn from_cells(side: usize, clarity: Vec<f64>, target: Vec<f64>, channel: Vec<CellChannel>) -> Result<Self> {
        let n = side * side;
        if n == 0 || clarity.len() != n || target.len() != n || channel.len() != n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "map with side {side} needs {n} cells, got {} / {} / {}",
                clarity.len(),
                target.len(),
                channel.len()
            )));
        }
        for &v in clarity.iter().chain(&target) {
            ClarityValue::new(v)?;
        }
        for c in &channel {
            if !(c.noise > 0.0) || !(c.process_noise >= 0.0) {
                return Err(Error::UnsupportedParameters(alloc::format!("invalid cell channel {c:?}")));
            }
        }
        Ok(Self {
            side,
            initial: clarity.clone(),
            clarity,
            target,
            channel,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.clarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clarity.is_empty()
    }

    pub fn center(&self, i: usize) -> [f64; 2] {
        cell_center(self.side, i)
    }

    pub fn clarity(&self) -> &[f64] {
        &self.clarity
    }

    pub fn initial_clarity(&self) -> &[f64] {
        &self.initial
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn channel(&self, i: usize) -> CellChannel {
        self.channel[i]
    }

    /// `q_T(p) - q(t, p)`.
    pub fn deficit(&self, i: usize) -> f64 {
        self.target[i] - self.clarity[i]
    }
}

pub fn cell_center(side: usize, i: usize) -> [f64; 2] {
    let h = 1.0 / side as f64;
    [((i % side) as f64 + 0.5) * h, ((i / side) as f64 + 0.5) * h]
}

/// Closed disc sensed around the robot position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscFootprint {
    pub radius: f64,
}

impl DiscFootprint {
    pub fn covers(&self, robot: [f64; 2], p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - robot[0], p[1] - robot[1]);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Advances every cell by one RK4 step of the clarity ODE with the robot
/// held at `robot`.
pub fn update_clarity_map(map: &mut ClarityMap, robot: [f64; 2], footprint: &DiscFootprint, dt: f64) {
    for i in 0..map.len() {
        let ch = map.channel[i];
        let info = if footprint.covers(robot, map.center(i)) {
            ch.info_rate()
        } else {
            0.0
        };
        let f = |q: f64| clarity_rate(q, info, ch.process_noise);
        let q = map.clarity[i];
        let k1 = f(q);
        let k2 = f(q + 0.5 * dt * k1);
        let k3 = f(q + 0.5 * dt * k2);
        let k4 = f(q + dt * k3);
        map.clarity[i] = (q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
    }
}

/// `mean_p (q(t, p) - q_T(p))`.
pub fn mean_clarity_error(map: &ClarityMap) -> f64 {
    let sum: f64 = map.clarity.iter().zip(&map.target).map(|(q, t)| q - t).sum();
    sum / map.len() as f64
}

/// Fraction of time the robot should spend over each cell; sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAllocation {
    density: Vec<f64>,
}

impl TimeAllocation {
    /// Normalises non-negative `weights`; all-zero weights give the uniform
    /// allocation.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::UnsupportedParameters("allocation weights must be finite and ≥ 0".into()));
        }
        let total: f64 = weights.iter().sum();
        let n = weights.len();
        let density = if total > 0.0 {
            weights.into_iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        Ok(Self { density })
    }

    pub fn uniform(cells: usize) -> Self {
        Self {
            density: vec![1.0 / cells as f64; cells],
        }
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }
}

/// Per-cell dwell time needed to lift `q₀(p)` to `q_T(p)` under continuous
/// sensing (inverting the closed form).
pub fn dwell_times(map: &ClarityMap) -> Result<Vec<f64>> {
    let mut unreachable = Vec::new();
    let mut limit = f64::NAN;
    let mut times = Vec::with_capacity(map.len());
    for i in 0..map.len() {
        let ch = map.channel[i];
        let (q0, qt) = (map.initial[i], map.target[i]);
        if qt <= q0 {
            times.push(0.0);
            continue;
        }
        let lim = clarity_limit(ch.gain, ch.noise, ch.process_noise)?.get();
        if qt >= lim {
            unreachable.push(i);
            limit = lim;
            times.push(0.0);
            continue;
        }
        let dwell = invert_closed_form(ClarityValue::new(qt)?, ClarityValue::new(q0)?, ch.gain, ch.noise, ch.process_noise)?;
        times.push(dwell.seconds);
    }
    if !unreachable.is_empty() {
        return Err(Error::UnreachableCells {
            count: unreachable.len(),
            first: unreachable.into_iter().take(8).collect(),
            limit,
        });
    }
    Ok(times)
}

/// Allocation proportional to the dwell time each cell needs.
pub fn clarity_time_allocation(map: &ClarityMap) -> Result<TimeAllocation> {
    TimeAllocation::from_weights(dwell_times(map)?)
}

/// Cell with the largest clarity deficit (lowest index on ties), if any
/// deficit is positive.
pub fn select_target(map: &ClarityMap) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..map.len() {
        let d = map.deficit(i);
        if d > 0.0 && best.is_none_or(|(_, b)| d > b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Anything that steers the coverage robot.
pub trait CoverageController {
    fn control(&mut self, map: &ClarityMap, robot: [f64; 2]) -> [f64; 2];

    /// Called after the robot moved to `robot` over a step of `dt`.
    fn observe(&mut self, _robot: [f64; 2], _dt: f64) {}
}

/// Drives to the cell with the largest deficit and hovers there until its
/// target is met, then re-targets.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyController {
    pub u_max: f64,
    pub gain: f64,
    pub capture_radius: f64,
    target: Option<usize>,
}

impl GreedyController {
    pub fn new(u_max: f64, gain: f64, capture_radius: f64) -> Self {
        Self {
            u_max,
            gain,
            capture_radius,
            target: None,
        }
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }
}

impl CoverageController for GreedyController {
    fn control(&mut self, map: &ClarityMap, robot: [f64; 2]) -> [f64; 2] {
        if self.target.is_none_or(|t| map.deficit(t) <= 0.0) {
            self.target = select_target(map);
        }
        let Some(t) = self.target else {
            return [0.0, 0.0];
        };
        let p = map.center(t);
        let d = [p[0] - robot[0], p[1] - robot[1]];
        let dist = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if dist <= self.capture_radius {
            return [0.0, 0.0];
        }
        let u = [self.gain * d[0], self.gain * d[1]];
        saturate(u, self.u_max)
    }
}

pub(crate) fn saturate(u: [f64; 2], limit: f64) -> [f64; 2] {
    let norm = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if norm > limit {
        [u[0] * limit / norm, u[1] * limit / norm]
    } else {
        u
    }
}

/// Single-integrator step on the unit square with reflecting walls.
pub fn step_robot(robot: [f64; 2], u: [f64; 2], dt: f64) -> [f64; 2] {
    let reflect = |mut v: f64| {
        // fold into [0, 2) then mirror the upper half
        v %= 2.0;
        if v < 0.0 {
            v += 2.0;
        }
        if v > 1.0 {
            2.0 - v
        } else {
            v
        }
    };
    [reflect(robot[0] + u[0] * dt), reflect(robot[1] + u[1] * dt)]
}

/// Time series produced by [`simulate_coverage`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRun {
    pub times: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    /// `mean_p q(t, p)²`, the scale of the process-noise decay.
    pub mean_square: Vec<f64>,
    /// First time at which every cell met its target.
    pub targets_met_at: Option<f64>,
    /// `(t, clarity per cell)` at the requested snapshot times.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl CoverageRun {
    /// First time with `|mean error| ≤ tol`.
    pub fn settling_time(&self, tol: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.mean_error)
            .find(|(_, e)| e.abs() <= tol)
            .map(|(t, _)| *t)
    }

    /// Largest positive mean error over the run (zero if never positive).
    pub fn peak_overshoot(&self) -> f64 {
        self.mean_error.iter().copied().fold(0.0, f64::max)
    }

    /// Whether every decrease of the mean error up to `until` is explained
    /// by process-noise decay alone, i.e. the controller itself never moves
    /// the error away from its targets.
    pub fn error_monotone_up_to_decay(&self, process_noise: f64, dt: f64, until: f64) -> bool {
        (1..self.times.len())
            .take_while(|&k| self.times[k] <= until)
            .all(|k| {
                let floor = process_noise * dt * self.mean_square[k - 1].max(self.mean_square[k]);
                self.mean_error[k] - self.mean_error[k - 1] >= -floor * (1.0 + 1e-9) - 1e-15
            })
    }
}

fn all_targets_met(map: &ClarityMap) -> bool {
    (0..map.len()).all(|i| map.deficit(i) <= 0.0)
}

fn mean_square(map: &ClarityMap) -> f64 {
    map.clarity.iter().map(|q| q * q).sum::<f64>() / map.len() as f64
}

/// Runs `controller` on `map` from `start` for `steps` steps of `dt`.
/// Sensing during a step happens at the position held at its start.
pub fn simulate_coverage<C: CoverageController + ?Sized>(
    map: &mut ClarityMap,
    controller: &mut C,
    footprint: &DiscFootprint,
    start: [f64; 2],
    dt: f64,
    steps: usize,
    snapshot_every: Option<usize>,
) -> CoverageRun {
    let mut robot = start;
    let mut run = CoverageRun {
        times: vec![0.0],
        mean_error: vec![mean_clarity_error(map)],
        positions: vec![robot],
        mean_square: vec![mean_square(map)],
        targets_met_at: all_targets_met(map).then_some(0.0),
        snapshots: Vec::new(),
    };
    if snapshot_every.is_some() {
        run.snapshots.push((0.0, map.clarity.clone()));
    }
    for k in 1..=steps {
        let u = controller.control(map, robot);
        update_clarity_map(map, robot, footprint, dt);
        robot = step_robot(robot, u, dt);
        controller.observe(robot, dt);
        let t = k as f64 * dt;
        run.times.push(t);
        run.mean_error.push(mean_clarity_error(map));
        run.positions.push(robot);
        run.mean_square.push(mean_square(map));
        if run.targets_met_at.is_none() && all_targets_met(map) {
            run.targets_met_at = Some(t);
        }
        if let Some(every) = snapshot_every {
            if every > 0 && k % every == 0 {
                run.snapshots.push((t, map.clarity.clone()));
            }
        }
    }
    run
}
