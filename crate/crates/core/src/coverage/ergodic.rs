//! Spectral multiscale coverage on the unit square.
//!
//! The target density and the time-averaged trajectory are compared through
//! cosine-basis coefficients `f_k(x) = Π cos(k_i π x_i) / h_k`. With
//! `S_k(t) = ∫₀ᵗ (f_k(x(s)) - ξ_k) ds` the feedback is
//!
//! ```text
//! B = Σ_k Λ_k S_k ∇f_k(x),   u = -u_max B / ‖B‖,   Λ_k = (1 + ‖k‖²)^(-3/2)
//! ```
//!
//! When `B` vanishes (always at `t = 0`, or when only the constant mode is
//! kept) the previous direction is held; the very first direction is `+x`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::{saturate, ClarityMap, CoverageController, TimeAllocation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicConfig {
    /// Modes `k_i ∈ 0..modes_per_axis` along each axis.
    pub modes_per_axis: usize,
    pub u_max: f64,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        Self {
            modes_per_axis: 10,
            u_max: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Mode {
    k: [f64; 2],
    norm: f64,
    weight: f64,
    target: f64,
}

impl Mode {
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.k[0] * PI * x[0]).cos() * (self.k[1] * PI * x[1]).cos() / self.norm
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = (self.k[0] * PI, self.k[1] * PI);
        [
            -a * (a * x[0]).sin() * (b * x[1]).cos() / self.norm,
            -b * (a * x[0]).cos() * (b * x[1]).sin() / self.norm,
        ]
    }
}

/// Ergodic controller tracking a [`TimeAllocation`] over a map's cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicController {
    config: ErgodicConfig,
    modes: Vec<Mode>,
    /// `S_k`, time-integrated coefficient mismatch.
    mismatch: Vec<f64>,
    elapsed: f64,
    direction: [f64; 2],
}

impl ErgodicController {
    pub fn new(config: ErgodicConfig, map: &ClarityMap, target: &TimeAllocation) -> Self {
        let kmax = config.modes_per_axis;
        let mut modes = Vec::with_capacity(kmax * kmax);
        for k0 in 0..kmax {
            for k1 in 0..kmax {
                let norm = [k0, k1].iter().map(|&k| if k == 0 { 1.0 } else { 0.5f64.sqrt() }).product();
                let ksq = (k0 * k0 + k1 * k1) as f64;
                let mut mode = Mode {
                    k: [k0 as f64, k1 as f64],
                    norm,
                    weight: (1.0 + ksq).powf(-1.5),
                    target: 0.0,
                };
                mode.target = target
                    .density()
                    .iter()
                    .enumerate()
                    .map(|(i, mu)| mu * mode.value(map.center(i)))
                    .sum();
                modes.push(mode);
            }
        }
        let n = modes.len();
        Self {
            config,
            modes,
            mismatch: alloc::vec![0.0; n],
            elapsed: 0.0,
            direction: [1.0, 0.0],
        }
    }

    /// `B = Σ Λ_k S_k ∇f_k(x)`.
    pub fn feedback_vector(&self, x: [f64; 2]) -> [f64; 2] {
        let mut b = [0.0, 0.0];
        for (mode, s) in self.modes.iter().zip(&self.mismatch) {
            if mode.k == [0.0, 0.0] {
                continue;
            }
            let g = mode.gradient(x);
            b[0] += mode.weight * s * g[0];
            b[1] += mode.weight * s * g[1];
        }
        b
    }

    /// Time-averaged trajectory coefficients `c_k`.
    pub fn trajectory_coefficients(&self) -> Vec<f64> {
        self.modes
            .iter()
            .zip(&self.mismatch)
            .map(|(m, s)| if self.elapsed > 0.0 { s / self.elapsed + m.target } else { 0.0 })
            .collect()
    }

    /// Target coefficients `ξ_k`.
    pub fn target_coefficients(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.target).collect()
    }

    /// Sobolev-type ergodic metric `Σ Λ_k (c_k - ξ_k)²`.
    pub fn ergodic_metric(&self) -> f64 {
        if self.elapsed == 0.0 {
            return 0.0;
        }
        self.modes
            .iter()
            .zip(&self.mismatch)
            .map(|(m, s)| m.weight * (s / self.elapsed).powi(2))
            .sum()
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }
}

impl CoverageController for ErgodicController {
    fn control(&mut self, _map: &ClarityMap, robot: [f64; 2]) -> [f64; 2] {
        let b = self.feedback_vector(robot);
        let norm = (b[0] * b[0] + b[1] * b[1]).sqrt();
        if norm > 1e-300 && norm.is_finite() {
            self.direction = [-b[0] / norm, -b[1] / norm];
        }
        saturate(
            [self.config.u_max * self.direction[0], self.config.u_max * self.direction[1]],
            self.config.u_max,
        )
    }

    fn observe(&mut self, robot: [f64; 2], dt: f64) {
        for (mode, s) in self.modes.iter().zip(self.mismatch.iter_mut()) {
            *s += (mode.value(robot) - mode.target) * dt;
        }
        self.elapsed += dt;
    }
}
