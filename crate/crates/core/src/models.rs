//! Vehicle dynamics, flow fields, sensing footprints and the
//! clarity-augmented system `[ẋ; q̇] = [f(x, u); g(x, q)]`.
//!
//! Every vehicle is control affine, `f(x, u) = f₀(x) + G(x) u`, and keeps
//! `f₀` and `G` separately so the HJB Hamiltonian can be maximised over the
//! control box in closed form.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::belief::{clarity_rate, ScalarChannel, StateFn};
use crate::info::ClarityValue;
use crate::{Error, Result};

/// Writes `f₀(x)` (length `n`) or `G(x)` (row-major `n × m`) into the buffer.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Axis-aligned box of admissible controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ControlBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "control bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::UnsupportedParameters(format!(
                "control box needs lower ≤ upper, got {lower:?} / {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[-limit, limit]^dim`.
    pub fn symmetric(limit: f64, dim: usize) -> Result<Self> {
        Self::new(vec![-limit; dim], vec![limit; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        const SLACK: f64 = 1e-12;
        u.len() == self.dim()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, h))| *v >= l - SLACK * l.abs().max(1.0) && *v <= h + SLACK * h.abs().max(1.0))
    }

    pub fn clamp(&self, u: &mut [f64]) {
        for (v, (l, h)) in u.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// Control-affine vehicle `ẋ = f₀(x) + G(x) u`, `u ∈ U`.
#[derive(Clone)]
pub struct VehicleModel {
    name: String,
    state_dim: usize,
    controls: ControlBox,
    drift: FieldFn,
    input: FieldFn,
    angle_dims: Vec<usize>,
}

impl fmt::Debug for VehicleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VehicleModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("controls", &self.controls)
            .field("angle_dims", &self.angle_dims)
            .finish_non_exhaustive()
    }
}

impl VehicleModel {
    pub fn new(name: impl Into<String>, state_dim: usize, controls: ControlBox, drift: FieldFn, input: FieldFn) -> Self {
        Self {
            name: name.into(),
            state_dim,
            controls,
            drift,
            input,
            angle_dims: Vec::new(),
        }
    }

    /// Marks state coordinates that are angles; rollouts report them wrapped
    /// to `(-π, π]`.
    pub fn with_angle_dims(mut self, dims: Vec<usize>) -> Self {
        self.angle_dims = dims;
        self
    }

    /// A vehicle that never moves.
    pub fn frozen(state_dim: usize, controls: ControlBox) -> Self {
        Self::new(
            "frozen",
            state_dim,
            controls,
            Arc::new(|_, out| out.fill(0.0)),
            Arc::new(|_, out| out.fill(0.0)),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.controls.dim()
    }

    pub fn controls(&self) -> &ControlBox {
        &self.controls
    }

    pub fn angle_dims(&self) -> &[usize] {
        &self.angle_dims
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    /// Row-major `n × m` input matrix `G(x)`.
    pub fn input_matrix(&self, x: &[f64], out: &mut [f64]) {
        (self.input)(x, out)
    }

    /// `f(x, u) = f₀(x) + G(x) u`.
    pub fn dynamics(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let (n, m) = (self.state_dim, self.control_dim());
        self.drift(x, out);
        let mut g = vec![0.0; n * m];
        self.input_matrix(x, &mut g);
        for i in 0..n {
            for j in 0..m {
                out[i] += g[i * m + j] * u[j];
            }
        }
    }

    /// `f(x, u)` as a new vector.
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.dynamics(x, u, &mut out);
        out
    }

    /// Copy of `x` with angle coordinates wrapped to `(-π, π]`.
    pub fn wrapped(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for &d in &self.angle_dims {
            y[d] = wrap_angle(y[d]);
        }
        y
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a - two_pi * ((a + PI) / two_pi).floor();
    if w <= -PI {
        w += two_pi;
    }
    w
}

type FlowFn = dyn Fn(&[f64]) -> [f64; 2] + Send + Sync;

/// Planar current `x ↦ (w_x, w_y)` in m/s.
#[derive(Clone)]
pub struct FlowField(Arc<FlowFn>);

impl fmt::Debug for FlowField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FlowField")
    }
}

impl FlowField {
    pub fn new(f: impl Fn(&[f64]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::new(|_| [0.0, 0.0])
    }

    /// Shear current `w_x = max(0, shear · x₂)`, constant `w_y = drift_y`.
    pub fn shear(shear: f64, drift_y: f64) -> Self {
        Self::new(move |x| [(shear * x[1]).max(0.0), drift_y])
    }

    /// The ocean current of the perceivability study:
    /// `w_x = max(0, 3 x₂)`, `w_y = -0.5`.
    pub fn ocean_current() -> Self {
        Self::shear(3.0, -0.5)
    }

    pub fn at(&self, x: &[f64]) -> [f64; 2] {
        (self.0)(x)
    }
}

/// `ẋ₁ = u₁ + w_x(x)`, `ẋ₂ = u₂ + w_y(x)`, `u ∈ [-u_max, u_max]²`.
pub fn single_integrator_2d(flow: FlowField, u_max: f64) -> Result<VehicleModel> {
    if !(u_max > 0.0) {
        return Err(Error::UnsupportedParameters(format!("u_max must be > 0, got {u_max}")));
    }
    Ok(VehicleModel::new(
        "single_integrator",
        2,
        ControlBox::symmetric(u_max, 2)?,
        Arc::new(move |x, out| {
            let w = flow.at(x);
            out[0] = w[0];
            out[1] = w[1];
        }),
        Arc::new(|_, g| {
            g.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        }),
    ))
}

/// `ẋ₁ = v cos x₃ + w_x`, `ẋ₂ = v sin x₃ + w_y`, `ẋ₃ = u`, `u ∈ [-u_max, u_max]`.
pub fn dubins_boat(flow: FlowField, speed: f64, u_max: f64) -> Result<VehicleModel> {
    if !(speed > 0.0) || !(u_max > 0.0) {
        return Err(Error::UnsupportedParameters(format!(
            "Dubins boat needs v > 0 and u_max > 0, got v = {speed}, u_max = {u_max}"
        )));
    }
    Ok(VehicleModel::new(
        "dubins_boat",
        3,
        ControlBox::symmetric(u_max, 1)?,
        Arc::new(move |x, out| {
            let w = flow.at(x);
            out[0] = speed * x[2].cos() + w[0];
            out[1] = speed * x[2].sin() + w[1];
            out[2] = 0.0;
        }),
        Arc::new(|_, g| {
            g.copy_from_slice(&[0.0, 0.0, 1.0]);
        }),
    )
    .with_angle_dims(vec![2]))
}

/// Physical parameters of the planar quadrotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub gravity: f64,
    pub inertia: f64,
    /// Thrust bounds `[u₁_min, u₁_max]` in N.
    pub thrust: (f64, f64),
    /// Symmetric torque bound in N·m.
    pub torque: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            gravity: 9.81,
            inertia: 0.25,
            thrust: (0.0, 2.0 * 9.81),
            torque: 2.0,
        }
    }
}

/// Planar quadrotor with state `(x₁, x₂, x₃, ẋ₁, ẋ₂, ẋ₃)` and controls
/// `(thrust, torque)`:
/// `ẍ₁ = u₁ sin x₃ / m`, `ẍ₂ = u₁ cos x₃ / m - g`, `ẍ₃ = u₂ / J`.
pub fn planar_quadrotor(params: QuadrotorParams) -> Result<VehicleModel> {
    let QuadrotorParams {
        mass,
        gravity,
        inertia,
        thrust,
        torque,
    } = params;
    if !(mass > 0.0) || !(inertia > 0.0) {
        return Err(Error::UnsupportedParameters(format!(
            "quadrotor needs m > 0 and J > 0, got m = {mass}, J = {inertia}"
        )));
    }
    let controls = ControlBox::new(vec![thrust.0, -torque], vec![thrust.1, torque])?;
    Ok(VehicleModel::new(
        "planar_quadrotor",
        6,
        controls,
        Arc::new(move |x, out| {
            out[0] = x[3];
            out[1] = x[4];
            out[2] = x[5];
            out[3] = 0.0;
            out[4] = -gravity;
            out[5] = 0.0;
        }),
        Arc::new(move |x, g| {
            g.fill(0.0);
            g[3 * 2] = x[2].sin() / mass;
            g[4 * 2] = x[2].cos() / mass;
            g[5 * 2 + 1] = 1.0 / inertia;
        }),
    ))
}

/// Sensing model for one environment location: gain `C(x)` and noise `R(x)`.
#[derive(Clone)]
pub struct SensingFootprint {
    gain: StateFn,
    noise: StateFn,
}

impl fmt::Debug for SensingFootprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SensingFootprint")
    }
}

impl SensingFootprint {
    pub fn new(gain: StateFn, noise: StateFn) -> Self {
        Self { gain, noise }
    }

    /// Same `C` and `R` everywhere.
    pub fn uniform(gain: f64, noise: f64) -> Result<Self> {
        check_noise(noise)?;
        Ok(Self::new(Arc::new(move |_| gain), Arc::new(move |_| noise)))
    }

    /// `C(x) = gain` while coordinate `axis` is strictly positive, else 0.
    pub fn above(axis: usize, gain: f64, noise: f64) -> Result<Self> {
        check_noise(noise)?;
        Ok(Self::new(
            Arc::new(move |x| if x[axis] > 0.0 { gain } else { 0.0 }),
            Arc::new(move |_| noise),
        ))
    }

    pub fn gain(&self, x: &[f64]) -> f64 {
        (self.gain)(x)
    }

    pub fn noise(&self, x: &[f64]) -> f64 {
        (self.noise)(x)
    }

    /// Binds the footprint to a process-noise level.
    pub fn channel(&self, process_noise: f64) -> Result<ScalarChannel> {
        ScalarChannel::new(self.gain.clone(), self.noise.clone(), process_noise)
    }
}

fn check_noise(noise: f64) -> Result<()> {
    if noise > 0.0 && noise.is_finite() {
        Ok(())
    } else {
        Err(Error::UnsupportedParameters(format!("measurement noise must be > 0, got {noise}")))
    }
}

/// `C(x) = gain_inside` when `(x₁, x₂)` lies in the closed square of
/// half-width `half_width` around `center`, else 0; `R(x) = noise`.
pub fn square_footprint(center: [f64; 2], half_width: f64, gain_inside: f64, noise: f64) -> Result<SensingFootprint> {
    if !(half_width > 0.0) {
        return Err(Error::UnsupportedParameters(format!("half width must be > 0, got {half_width}")));
    }
    check_noise(noise)?;
    Ok(SensingFootprint::new(
        Arc::new(move |x| {
            let inside = (x[0] - center[0]).abs() <= half_width && (x[1] - center[1]).abs() <= half_width;
            if inside {
                gain_inside
            } else {
                0.0
            }
        }),
        Arc::new(move |_| noise),
    ))
}

/// Downward cone of half-angle `theta` looking at `target`.
///
/// The first `target.len()` state coordinates are the horizontal position
/// and the next one is the altitude. `C(x) = 1` iff
/// `‖x_pos - target‖ ≤ x_alt tan θ` with `x_alt > 0`.
pub fn cone_footprint(target: Vec<f64>, theta: f64, noise: f64) -> Result<SensingFootprint> {
    if !(theta > 0.0 && theta < PI / 2.0) {
        return Err(Error::UnsupportedParameters(format!("cone half-angle must lie in (0, π/2), got {theta}")));
    }
    check_noise(noise)?;
    let tan = theta.tan();
    Ok(SensingFootprint::new(
        Arc::new(move |x| {
            let d = target.len();
            let alt = x[d];
            if !(alt > 0.0) {
                return 0.0;
            }
            let dist2: f64 = target.iter().zip(x).map(|(p, xi)| (xi - p) * (xi - p)).sum();
            let reach = alt * tan;
            // relative slack so the boundary stays closed under rounding of tan
            if dist2.sqrt() <= reach * (1.0 + 4.0 * f64::EPSILON) {
                1.0
            } else {
                0.0
            }
        }),
        Arc::new(move |_| noise),
    ))
}

/// Vehicle coupled with a clarity channel:
/// `[ẋ; q̇] = [f(x, u); C(x)²/R(x) (1-q)² - Q q²]`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub vehicle: VehicleModel,
    pub channel: ScalarChannel,
}

impl AugmentedSystem {
    pub fn new(vehicle: VehicleModel, footprint: &SensingFootprint, process_noise: f64) -> Result<Self> {
        Ok(Self {
            vehicle,
            channel: footprint.channel(process_noise)?,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.vehicle.state_dim()
    }

    /// `g(x, q)`.
    pub fn clarity_rate(&self, x: &[f64], q: f64) -> f64 {
        clarity_rate(q, self.channel.info_rate(x), self.channel.process_noise())
    }

    /// `(f(x, u), g(x, q))`; rejects controls outside the box.
    pub fn augmented_rate(&self, x: &[f64], q: ClarityValue, u: &[f64]) -> Result<(Vec<f64>, f64)> {
        if !self.vehicle.controls().contains(u) {
            return Err(Error::RejectedInput(u.to_vec()));
        }
        let qdot = crate::belief::scalar_clarity_rate(q, x, &self.channel);
        Ok((self.vehicle.eval(x, u), qdot))
    }
}
