//! Clarity-aware safety filter for a landing planar quadrotor.
//!
//! The safe set is `h(x, q) = q - φ(x₂) ≥ 0` with `φ(s) = 4 / (4 + s²)`.
//! For `x₂ ≥ 0` this is the same as `x₂ ≥ 2σ`, where `σ² = 1/q - 1`: the
//! vehicle may only get as low as twice the standard deviation of its
//! landing-site estimate.
//!
//! `h` has relative degree two, so the filter enforces the second-order
//! condition `ψ̇₁ + α₂ ψ₁ ≥ 0` with `ψ₁ = ḣ + α₁ h`, which is affine in `u`,
//! and projects the nominal control onto it inside the actuator box.
//!
//! State layout is `(x₁, x₂, θ, ẋ₁, ẋ₂, θ̇)`. The sensing gain is treated as
//! locally constant in `x`, which holds away from touchdown for the
//! altitude-gated footprint used in the landing scenario.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::belief::{clarity_rate, clarity_rate_dq};
use crate::models::{AugmentedSystem, ControlBox, QuadrotorParams};
use crate::{Error, Result};

const ALTITUDE: usize = 1;
const CLIMB_RATE: usize = 4;

/// `‖a‖` below which the constraint is treated as independent of `u`.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

fn phi(s: f64) -> f64 {
    4.0 / (4.0 + s * s)
}

fn phi_prime(s: f64) -> f64 {
    let d = 4.0 + s * s;
    -8.0 * s / (d * d)
}

fn phi_second(s: f64) -> f64 {
    let d = 4.0 + s * s;
    -8.0 / (d * d) + 32.0 * s * s / (d * d * d)
}

/// `h(x, q) = q - 4 / (4 + x₂²)`.
pub fn barrier_value(x: &[f64], q: f64) -> f64 {
    q - phi(x[ALTITUDE])
}

/// Gains of the linear class-K functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HocbfParams {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl HocbfParams {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > 0.0 && alpha1.is_finite() && alpha2.is_finite()) {
            return Err(Error::UnsupportedParameters(alloc::format!(
                "class-K gains must be positive, got α₁ = {alpha1}, α₂ = {alpha2}"
            )));
        }
        Ok(Self { alpha1, alpha2 })
    }
}

impl Default for HocbfParams {
    fn default() -> Self {
        Self {
            alpha1: 2.0,
            alpha2: 2.0,
        }
    }
}

/// `a · u ≥ b` together with the barrier quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct HocbfConstraint {
    pub a: Vec<f64>,
    pub b: f64,
    pub h: f64,
    pub h_dot: f64,
    pub psi1: f64,
}

impl HocbfConstraint {
    pub fn is_degenerate(&self) -> bool {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt() < DEGENERATE_TOLERANCE
    }

    /// `a · u - b`; non-negative iff `u` satisfies the constraint.
    pub fn slack(&self, u: &[f64]) -> f64 {
        self.a.iter().zip(u).map(|(a, u)| a * u).sum::<f64>() - self.b
    }
}

/// `ḣ = g(x, q) - φ'(x₂) ẋ₂`, independent of `u`.
pub fn barrier_rate(sys: &AugmentedSystem, x: &[f64], q: f64) -> f64 {
    sys.clarity_rate(x, q) - phi_prime(x[ALTITUDE]) * x[CLIMB_RATE]
}

/// Builds `a · u ≥ b` from `ψ̇₁ + α₂ ψ₁ ≥ 0`.
pub fn hocbf_constraint(sys: &AugmentedSystem, x: &[f64], q: f64, params: &HocbfParams) -> HocbfConstraint {
    let n = sys.state_dim();
    let m = sys.vehicle.control_dim();
    let info = sys.channel.info_rate(x);
    let process_noise = sys.channel.process_noise();
    let (s, v) = (x[ALTITUDE], x[CLIMB_RATE]);

    let g = clarity_rate(q, info, process_noise);
    let h = barrier_value(x, q);
    let h_dot = g - phi_prime(s) * v;
    let psi1 = h_dot + params.alpha1 * h;

    let mut drift = vec![0.0; n];
    sys.vehicle.drift(x, &mut drift);
    let mut input = vec![0.0; n * m];
    sys.vehicle.input_matrix(x, &mut input);

    // ḧ = ∂g/∂q g - φ'' v² - φ' (f₀[v] + G[v]·u)
    let a = (0..m).map(|j| -phi_prime(s) * input[CLIMB_RATE * m + j]).collect();
    let free = clarity_rate_dq(q, info, process_noise) * g - phi_second(s) * v * v - phi_prime(s) * drift[CLIMB_RATE];
    let b = -(free + params.alpha1 * h_dot + params.alpha2 * psi1);
    HocbfConstraint { a, b, h, h_dot, psi1 }
}

/// `min ‖u - u_nom‖²` subject to `a · u ≥ b` and the control box.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSpec {
    pub u_nom: Vec<f64>,
    pub a: Vec<f64>,
    pub b: f64,
    pub controls: ControlBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vec<f64>,
    /// The safety constraint binds at the solution.
    pub constraint_active: bool,
    /// The constraint did not depend on `u`; the nominal control was passed
    /// through (clamped to the box).
    pub degenerate: bool,
}

const FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// Exact solution by enumerating which box faces are active. With the
/// safety constraint inactive the answer is the clamped nominal control;
/// with it active, every assignment of {free, lower, upper} to the control
/// channels gives a closed-form candidate. The cheapest feasible candidate
/// wins, lowest enumeration index on ties.
pub fn qp_filter(spec: &QpSpec) -> Result<QpSolution> {
    let m = spec.controls.dim();
    if spec.u_nom.len() != m || spec.a.len() != m {
        return Err(Error::DimensionMismatch(alloc::format!(
            "QP with {m} controls got u_nom of {} and a of {}",
            spec.u_nom.len(),
            spec.a.len()
        )));
    }
    let (lo, hi) = (spec.controls.lower(), spec.controls.upper());
    let mut clamped = spec.u_nom.clone();
    spec.controls.clamp(&mut clamped);
    let a_norm = spec.a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if a_norm < DEGENERATE_TOLERANCE {
        log::debug!("degenerate safety constraint (‖a‖ = {a_norm:e}); passing nominal control through");
        return Ok(QpSolution {
            u: clamped,
            constraint_active: false,
            degenerate: true,
        });
    }
    let tol = FEASIBILITY_TOLERANCE * (1.0 + spec.b.abs());
    let best_case: f64 = (0..m).map(|j| (spec.a[j] * lo[j]).max(spec.a[j] * hi[j])).sum();
    if best_case < spec.b - tol {
        return Err(Error::Infeasible {
            slack: best_case - spec.b,
        });
    }
    let dot = |u: &[f64]| spec.a.iter().zip(u).map(|(a, u)| a * u).sum::<f64>();
    if dot(&clamped) >= spec.b - tol {
        return Ok(QpSolution {
            u: clamped,
            constraint_active: false,
            degenerate: false,
        });
    }

    let cost = |u: &[f64]| u.iter().zip(&spec.u_nom).map(|(u, n)| (u - n) * (u - n)).sum::<f64>();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let combos = 3usize.pow(m as u32);
    let mut u = vec![0.0; m];
    for code in 0..combos {
        // digit 0 = free, 1 = lower face, 2 = upper face
        let mut c = code;
        let mut fixed_dot = 0.0;
        let mut free_norm2 = 0.0;
        let mut free_dot = 0.0;
        for j in 0..m {
            match c % 3 {
                0 => {
                    u[j] = spec.u_nom[j];
                    free_norm2 += spec.a[j] * spec.a[j];
                    free_dot += spec.a[j] * spec.u_nom[j];
                }
                1 => {
                    u[j] = lo[j];
                    fixed_dot += spec.a[j] * lo[j];
                }
                _ => {
                    u[j] = hi[j];
                    fixed_dot += spec.a[j] * hi[j];
                }
            }
            c /= 3;
        }
        let residual = spec.b - fixed_dot;
        if free_norm2 > 0.0 {
            let step = (residual - free_dot) / free_norm2;
            let mut c = code;
            for j in 0..m {
                if c % 3 == 0 {
                    u[j] += spec.a[j] * step;
                }
                c /= 3;
            }
        } else if (residual).abs() > tol {
            continue;
        }
        if !spec.controls.contains(&u) || dot(&u) < spec.b - tol {
            continue;
        }
        let c = cost(&u);
        if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
            best = Some((c, u.clone()));
        }
    }
    match best {
        Some((_, mut u)) => {
            for j in 0..m {
                u[j] = u[j].clamp(lo[j], hi[j]);
            }
            Ok(QpSolution {
                u,
                constraint_active: true,
                degenerate: false,
            })
        }
        None => Err(Error::Infeasible {
            slack: best_case - spec.b,
        }),
    }
}

/// Builds and solves the filter QP at `(x, q)` for a nominal control.
pub fn safe_control(sys: &AugmentedSystem, x: &[f64], q: f64, u_nom: &[f64], params: &HocbfParams) -> Result<QpSolution> {
    let con = hocbf_constraint(sys, x, q, params);
    qp_filter(&QpSpec {
        u_nom: u_nom.to_vec(),
        a: con.a,
        b: con.b,
        controls: sys.vehicle.controls().clone(),
    })
}

/// Gains of the nominal descent controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandingGains {
    /// Horizontal landing point.
    pub target_x: f64,
    /// Maximum commanded descent speed.
    pub descent_rate: f64,
    /// Commanded descent speed per metre of altitude, below the cap.
    pub altitude_gain: f64,
    pub kp: f64,
    pub kd: f64,
    pub kv: f64,
    pub k_theta: f64,
    pub k_omega: f64,
    pub max_tilt: f64,
}

impl Default for LandingGains {
    fn default() -> Self {
        Self {
            target_x: 0.0,
            descent_rate: 1.0,
            altitude_gain: 1.0,
            kp: 1.0,
            kd: 2.0,
            kv: 2.0,
            k_theta: 20.0,
            k_omega: 8.0,
            max_tilt: 0.5,
        }
    }
}

/// Desired horizontal and vertical accelerations of the descent.
pub fn landing_acceleration(x: &[f64], gains: &LandingGains) -> [f64; 2] {
    let v_des = -gains.descent_rate.min(gains.altitude_gain * x[ALTITUDE].max(0.0));
    [
        gains.kp * (gains.target_x - x[0]) - gains.kd * x[3],
        gains.kv * (v_des - x[CLIMB_RATE]),
    ]
}

/// PD descent to the landing point with a thrust-vectoring attitude loop:
/// thrust realises the desired acceleration, torque tracks the pitch it
/// needs. Clamped to the actuator box.
pub fn landing_nominal_controller(x: &[f64], quad: &QuadrotorParams, gains: &LandingGains) -> Vec<f64> {
    let [ax, az] = landing_acceleration(x, gains);
    let lift = az + quad.gravity;
    let theta_des = ax.atan2(lift).clamp(-gains.max_tilt, gains.max_tilt);
    let thrust = quad.mass * (ax * ax + lift * lift).sqrt();
    let torque = quad.inertia * (gains.k_theta * (theta_des - x[2]) - gains.k_omega * x[5]);
    vec![
        thrust.clamp(quad.thrust.0, quad.thrust.1),
        torque.clamp(-quad.torque, quad.torque),
    ]
}
