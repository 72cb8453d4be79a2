//! Clarity and covariance evolution under continuous-time Kalman filtering.
//!
//! For a scalar random walk `ṁ = w, w ~ N(0, Q)` observed through
//! `y = C(x) m + v, v ~ N(0, R(x))`, clarity obeys the Riccati-type ODE
//!
//! ```text
//! q̇ = C(x)²/R(x) (1 - q)² - Q q²
//! ```
//!
//! which for constant `C, R, Q > 0` has a closed-form solution approaching
//! `q∞ = k/(k+1)`, `k = C/√(QR)`. The vector case is covered by
//! [`covariance_rate`] and [`matrix_clarity_rate`].

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::info::{det_spd, ClarityValue};
use crate::ode::{integrate_with_projection, OdeTrajectory};
use crate::{Error, Result};

/// State-dependent scalar callback, e.g. a measurement gain `C(x)`.
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// State-dependent matrix callback, e.g. `C(x)` or `R(x)` in the vector case.
pub type StateMatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// `q̇ = info_rate · (1 - q)² - Q q²`, where `info_rate = C²/R`.
#[inline]
pub fn clarity_rate(q: f64, info_rate: f64, process_noise: f64) -> f64 {
    info_rate * (1.0 - q) * (1.0 - q) - process_noise * q * q
}

/// `∂q̇/∂q` of [`clarity_rate`].
#[inline]
pub fn clarity_rate_dq(q: f64, info_rate: f64, process_noise: f64) -> f64 {
    -2.0 * info_rate * (1.0 - q) - 2.0 * process_noise * q
}

/// Largest RK4 step that keeps Eq.-(8)-type trajectories inside `[0, 1]`
/// comfortably: `dt ≤ 0.1 R / C²`.
pub fn clarity_step_bound(gain: f64, noise: f64) -> f64 {
    if gain == 0.0 {
        f64::INFINITY
    } else {
        0.1 * noise / (gain * gain)
    }
}

/// Scalar measurement channel `y = C(x) m + v`, `v ~ N(0, R(x))`, for a
/// quantity drifting with process noise `Q`.
#[derive(Clone)]
pub struct ScalarChannel {
    gain: StateFn,
    noise: StateFn,
    process_noise: f64,
}

impl fmt::Debug for ScalarChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarChannel")
            .field("process_noise", &self.process_noise)
            .finish_non_exhaustive()
    }
}

impl ScalarChannel {
    pub fn new(gain: StateFn, noise: StateFn, process_noise: f64) -> Result<Self> {
        if !(process_noise >= 0.0) || !process_noise.is_finite() {
            return Err(Error::UnsupportedParameters(format!(
                "process noise must be finite and ≥ 0, got {process_noise}"
            )));
        }
        Ok(Self {
            gain,
            noise,
            process_noise,
        })
    }

    /// Channel with state-independent `C` and `R`.
    pub fn constant(gain: f64, noise: f64, process_noise: f64) -> Result<Self> {
        if !(noise > 0.0) {
            return Err(Error::UnsupportedParameters(format!("measurement noise must be > 0, got {noise}")));
        }
        Self::new(Arc::new(move |_| gain), Arc::new(move |_| noise), process_noise)
    }

    pub fn gain(&self, x: &[f64]) -> f64 {
        (self.gain)(x)
    }

    pub fn noise(&self, x: &[f64]) -> f64 {
        (self.noise)(x)
    }

    pub fn process_noise(&self) -> f64 {
        self.process_noise
    }

    /// `C(x)² / R(x)`.
    pub fn info_rate(&self, x: &[f64]) -> f64 {
        let c = self.gain(x);
        if c == 0.0 {
            return 0.0;
        }
        c * c / self.noise(x)
    }
}

/// `q̇ = C(x)²/R(x) (1 - q)² - Q q²` for the channel at vehicle state `x`.
pub fn scalar_clarity_rate(q: ClarityValue, x: &[f64], ch: &ScalarChannel) -> f64 {
    clarity_rate(q.get(), ch.info_rate(x), ch.process_noise())
}

/// Coefficients of the closed-form clarity trajectory for constant `C, R, Q > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCoefficients {
    pub k: f64,
    pub q_inf: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub process_noise: f64,
}

fn check_positive(gain: f64, noise: f64, process_noise: f64) -> Result<()> {
    for (name, v) in [("C", gain), ("R", noise), ("Q", process_noise)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::UnsupportedParameters(format!(
                "closed-form clarity needs C, R, Q > 0 ({name} = {v})"
            )));
        }
    }
    Ok(())
}

impl ClosedFormCoefficients {
    pub fn new(q0: ClarityValue, gain: f64, noise: f64, process_noise: f64) -> Result<Self> {
        check_positive(gain, noise, process_noise)?;
        let k = gain / (process_noise * noise).sqrt();
        let q_inf = k / (k + 1.0);
        let q0 = q0.get();
        let gamma1 = q_inf - q0;
        // k = 1 gives gamma2 = 0, gamma3 = -1; the expression stays valid.
        let gamma2 = gamma1 * (k - 1.0);
        let gamma3 = (k - 1.0) * q0 - k;
        Ok(Self {
            k,
            q_inf,
            gamma1,
            gamma2,
            gamma3,
            process_noise,
        })
    }

    /// `q(t) = q∞ (1 + 2γ₁ / (γ₂ + γ₃ e^{2kQt}))`.
    pub fn eval(&self, t: f64) -> f64 {
        let growth = (2.0 * self.k * self.process_noise * t).exp();
        // γ₃ < 0 and γ₂ + γ₃ = -2q∞, so the denominator is negative for t ≥ 0.
        self.q_inf * (1.0 + 2.0 * self.gamma1 / (self.gamma2 + self.gamma3 * growth))
    }
}

/// Clarity after `t` seconds of continuous sensing with constant `C, R, Q > 0`.
pub fn closed_form_clarity(t: f64, q0: ClarityValue, gain: f64, noise: f64, process_noise: f64) -> Result<ClarityValue> {
    if !(t >= 0.0) {
        return Err(Error::UnsupportedParameters(format!("time must be ≥ 0, got {t}")));
    }
    let coeffs = ClosedFormCoefficients::new(q0, gain, noise, process_noise)?;
    if t == 0.0 {
        return Ok(q0);
    }
    Ok(ClarityValue::saturating(coeffs.eval(t)))
}

/// Asymptotic clarity `q∞ = k/(k+1)`, `k = C/√(QR)`.
///
/// `C = 0` is accepted and yields `q∞ = 0`.
pub fn clarity_limit(gain: f64, noise: f64, process_noise: f64) -> Result<ClarityValue> {
    if gain == 0.0 && noise > 0.0 && process_noise > 0.0 {
        return Ok(ClarityValue::ZERO);
    }
    check_positive(gain, noise, process_noise)?;
    let k = gain / (process_noise * noise).sqrt();
    Ok(ClarityValue::saturating(k / (k + 1.0)))
}

/// Result of [`invert_closed_form`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellTime {
    /// Sensing time needed to raise clarity from `q0` to the target.
    pub seconds: f64,
    /// The target was already met at `q0` (`seconds` is then zero).
    pub already_satisfied: bool,
}

/// Time of continuous sensing needed to raise clarity from `q0` to
/// `q_target`, found by bisection on the closed form.
pub fn invert_closed_form(
    q_target: ClarityValue,
    q0: ClarityValue,
    gain: f64,
    noise: f64,
    process_noise: f64,
) -> Result<DwellTime> {
    let coeffs = ClosedFormCoefficients::new(q0, gain, noise, process_noise)?;
    let target = q_target.get();
    if target <= q0.get() {
        return Ok(DwellTime {
            seconds: 0.0,
            already_satisfied: target < q0.get(),
        });
    }
    if target >= coeffs.q_inf {
        return Err(Error::UnreachableTarget {
            target,
            limit: coeffs.q_inf,
        });
    }
    // q(t) increases monotonically from q0 < target towards q∞ > target.
    let mut hi = 1.0;
    while coeffs.eval(hi) < target - 1e-12 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::UnreachableTarget {
                target,
                limit: coeffs.q_inf,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if coeffs.eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DwellTime {
        seconds: 0.5 * (lo + hi),
        already_satisfied: false,
    })
}

/// Linear environment `ṁ = A m + w`, `w ~ N(0, Q)`, observed through
/// `y = C(x) m + v`, `v ~ N(0, R(x))`.
#[derive(Clone)]
pub struct MatrixEnvironment {
    pub drift: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub output: StateMatrixFn,
    pub output_noise: StateMatrixFn,
}

impl fmt::Debug for MatrixEnvironment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixEnvironment")
            .field("drift", &self.drift)
            .field("process_noise", &self.process_noise)
            .finish_non_exhaustive()
    }
}

impl MatrixEnvironment {
    pub fn new(
        drift: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        output: StateMatrixFn,
        output_noise: StateMatrixFn,
    ) -> Result<Self> {
        crate::info::check_spd(&process_noise)?;
        if !drift.is_square() || drift.nrows() != process_noise.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{} but Q is {}x{}",
                drift.nrows(),
                drift.ncols(),
                process_noise.nrows(),
                process_noise.ncols()
            )));
        }
        Ok(Self {
            drift,
            process_noise,
            output,
            output_noise,
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// `C(x)ᵀ R(x)⁻¹ C(x)`.
    fn information_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let c = (self.output)(x);
        let r = (self.output_noise)(x);
        if c.ncols() != self.dim() || r.nrows() != c.nrows() || !r.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "C(x) is {}x{}, R(x) is {}x{}, environment dimension {}",
                c.nrows(),
                c.ncols(),
                r.nrows(),
                r.ncols(),
                self.dim()
            )));
        }
        let chol = r.cholesky().ok_or(Error::SingularMatrix("R(x)"))?;
        Ok(c.transpose() * chol.solve(&c))
    }
}

/// Covariance `P` of the environment estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState(pub DMatrix<f64>);

impl CovarianceState {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        crate::info::check_spd(&p)?;
        Ok(Self(p))
    }

    /// `1 / (1 + det P)`.
    pub fn clarity(&self) -> Result<ClarityValue> {
        Ok(ClarityValue::saturating(1.0 / (1.0 + det_spd(&self.0)?)))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `Ṗ = AP + PAᵀ + Q - P Cᵀ R⁻¹ C P`, symmetrised.
pub fn covariance_rate(p: &CovarianceState, env: &MatrixEnvironment, x: &[f64]) -> Result<DMatrix<f64>> {
    let p = &p.0;
    let info = env.information_matrix(x)?;
    let mut rate = &env.drift * p + p * env.drift.transpose() + &env.process_noise - p * info * p;
    symmetrize(&mut rate);
    Ok(rate)
}

/// `q̇ = q(1-q)(tr(Cᵀ R⁻¹ C P) - tr(2A + P⁻¹ Q))` with `q = 1/(1 + det P)`.
///
/// There is deliberately no measurement argument: clarity evolution does not
/// depend on the realised measurements.
pub fn matrix_clarity_rate(p: &CovarianceState, env: &MatrixEnvironment, x: &[f64]) -> Result<f64> {
    let q = p.clarity()?.get();
    let info = env.information_matrix(x)?;
    let chol = p.0.clone().cholesky().ok_or(Error::SingularMatrix("P"))?;
    let gain_term = (info * &p.0).trace();
    let loss_term = 2.0 * env.drift.trace() + chol.solve(&env.process_noise).trace();
    Ok(q * (1.0 - q) * (gain_term - loss_term))
}

/// Integrates the Riccati equation for `P` with RK4 along a known vehicle
/// path `x_of_t`, symmetrising after every step.
pub fn integrate_covariance<X>(
    p0: &CovarianceState,
    env: &MatrixEnvironment,
    x_of_t: X,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<(f64, CovarianceState)>>
where
    X: Fn(f64) -> Vec<f64>,
{
    let n = env.dim();
    let mut failure = None;
    let mut rate = |t: f64, y: &[f64], dy: &mut [f64]| {
        let p = CovarianceState(DMatrix::from_column_slice(n, n, y));
        match covariance_rate(&p, env, &x_of_t(t)) {
            Ok(r) => dy.copy_from_slice(r.as_slice()),
            Err(e) => {
                failure.get_or_insert(e);
                dy.fill(f64::NAN);
            }
        }
    };
    let project = |y: &mut [f64]| {
        let mut m = DMatrix::from_column_slice(n, n, y);
        symmetrize(&mut m);
        y.copy_from_slice(m.as_slice());
    };
    let traj: Result<OdeTrajectory> = integrate_with_projection(&mut rate, project, p0.0.as_slice(), t0, t1, dt);
    if let Some(e) = failure {
        return Err(e);
    }
    let traj = traj?;
    Ok(traj
        .times
        .into_iter()
        .zip(traj.states)
        .map(|(t, s)| (t, CovarianceState(DMatrix::from_column_slice(n, n, &s))))
        .collect())
}

/// `µ̇ = P C(x) R(x)⁻¹ (y - C(x) µ)` for the scalar channel.
pub fn kalman_mean_rate(mean: f64, variance: f64, ch: &ScalarChannel, x: &[f64], measurement: f64) -> f64 {
    let c = ch.gain(x);
    if c == 0.0 {
        return 0.0;
    }
    variance * c / ch.noise(x) * (measurement - c * mean)
}

/// Integrates the scalar clarity ODE at a fixed vehicle state, warning when
/// `dt` exceeds [`clarity_step_bound`].
pub fn integrate_scalar_clarity(
    q0: ClarityValue,
    x: &[f64],
    ch: &ScalarChannel,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<OdeTrajectory> {
    let bound = clarity_step_bound(ch.gain(x), ch.noise(x));
    if dt > bound {
        log::warn!("clarity step dt = {dt} exceeds the recommended bound {bound}; [0, 1] invariance may fail");
    }
    let info = ch.info_rate(x);
    let qn = ch.process_noise();
    crate::ode::integrate_fixed_step(
        |_, y: &[f64], d: &mut [f64]| d[0] = clarity_rate(y[0], info, qn),
        &[q0.get()],
        t0,
        t1,
        dt,
    )
}
