//! Clarity and differential entropy.
//!
//! Clarity maps differential entropy `h ∈ [-∞, ∞]` of an `n`-dimensional
//! variable onto `[0, 1]`:
//!
//! ```text
//! q = (1 + exp(2h) / (2πe)^n)^-1
//! ```
//!
//! For a Gaussian `N(µ, P)` this collapses to `q = 1 / (1 + det P)`.

use alloc::format;
use core::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Relative eigenvalue floor used to decide positive definiteness.
pub const SPD_RELATIVE_TOLERANCE: f64 = 1e-10;

/// `ln(2πe)`, the per-dimension entropy normaliser.
pub fn log_two_pi_e() -> f64 {
    (2.0 * PI * E).ln()
}

/// Checks that `m` is square, symmetric and positive definite.
///
/// Positive definiteness is decided on the symmetric eigenvalues: every
/// eigenvalue must exceed `1e-10 × λ_max` and `λ_max` must be positive.
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidBelief(format!(
            "covariance must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidBelief("covariance has non-finite entries".into()));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::InvalidBelief(format!("covariance not symmetric (|P - Pᵀ| = {asym:e})")));
    }
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if max <= 0.0 || min <= SPD_RELATIVE_TOLERANCE * max {
        return Err(Error::InvalidBelief(format!(
            "covariance not positive definite (eigenvalues in [{min:e}, {max:e}])"
        )));
    }
    Ok(())
}

/// `ln det m` through a Cholesky factor. `m` must be SPD.
pub(crate) fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::SingularMatrix("Cholesky factorization failed"))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `det m` through a Cholesky factor. `m` must be SPD.
pub(crate) fn det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::SingularMatrix("Cholesky factorization failed"))?;
    Ok(chol.l_dirty().diagonal().iter().map(|d| d * d).product())
}

/// Normal belief `N(mean, covariance)` over an `n`-dimensional quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_spd(&covariance)?;
        if mean.len() != covariance.nrows() {
            return Err(Error::InvalidBelief(format!(
                "mean has dimension {} but covariance is {}x{}",
                mean.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBelief("mean has non-finite entries".into()));
        }
        Ok(Self { mean, covariance })
    }

    /// Zero-mean scalar belief with variance `variance`.
    pub fn scalar(variance: f64) -> Result<Self> {
        Self::new(DVector::zeros(1), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Same covariance, mean shifted by `offset`.
    pub fn shifted(&self, offset: &DVector<f64>) -> Result<Self> {
        Self::new(&self.mean + offset, self.covariance.clone())
    }

    /// Belief of `A X` for the linear map `a`.
    pub fn transformed(&self, a: &DMatrix<f64>) -> Result<Self> {
        let cov = a * &self.covariance * a.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Self::new(a * &self.mean, cov)
    }
}

/// Uniform belief `U(lower, upper)` over a scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBelief {
    lower: f64,
    upper: f64,
}

impl UniformBelief {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
            return Err(Error::InvalidBelief(format!(
                "uniform support must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Clarity of a quantity, a dimensionless value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ClarityValue(f64);

impl ClarityValue {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    pub fn new(q: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&q) {
            Ok(Self(q))
        } else {
            Err(Error::InvalidClarity(q))
        }
    }

    /// Clamps `q` into `[0, 1]`; NaN maps to zero.
    pub fn saturating(q: f64) -> Self {
        if q.is_nan() {
            Self(0.0)
        } else {
            Self(q.clamp(0.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<ClarityValue> for f64 {
    fn from(q: ClarityValue) -> f64 {
        q.0
    }
}

/// Differential entropy `h` (nats) of an `dim`-dimensional variable.
/// `h` may be `±∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropy {
    pub h: f64,
    pub dim: usize,
}

impl Entropy {
    pub fn new(h: f64, dim: usize) -> Result<Self> {
        if dim == 0 || h.is_nan() {
            return Err(Error::InvalidBelief(format!("entropy needs dim ≥ 1 and non-NaN h, got ({h}, {dim})")));
        }
        Ok(Self { h, dim })
    }
}

/// `h = ½ ln((2πe)^n det P)`.
pub fn entropy_of_gaussian(belief: &GaussianBelief) -> Entropy {
    let n = belief.dim();
    let log_det = log_det_spd(belief.covariance()).expect("GaussianBelief holds an SPD covariance");
    Entropy {
        h: 0.5 * (n as f64 * log_two_pi_e() + log_det),
        dim: n,
    }
}

/// `h = ln(b - a)`.
pub fn entropy_of_uniform(belief: &UniformBelief) -> Entropy {
    Entropy {
        h: belief.width().ln(),
        dim: 1,
    }
}

pub fn clarity_from_entropy(entropy: Entropy) -> ClarityValue {
    // exp(2h)/(2πe)^n, evaluated in log space to delay overflow.
    let ratio = (2.0 * entropy.h - entropy.dim as f64 * log_two_pi_e()).exp();
    ClarityValue::saturating(1.0 / (1.0 + ratio))
}

/// `q = 1 / (1 + det P)`.
pub fn clarity_of_gaussian(belief: &GaussianBelief) -> ClarityValue {
    let det = det_spd(belief.covariance()).expect("GaussianBelief holds an SPD covariance");
    ClarityValue::saturating(1.0 / (1.0 + det))
}

/// `q = 1 / (1 + (b - a)² / (2πe))`.
pub fn clarity_of_uniform(belief: &UniformBelief) -> ClarityValue {
    clarity_from_entropy(entropy_of_uniform(belief))
}

/// Lower bound `1/q - 1` on `det E[(X - X̂)(X - X̂)ᵀ]` for any estimator `X̂`.
/// Returns `+∞` at `q = 0`.
pub fn error_bound_from_clarity(q: ClarityValue) -> f64 {
    if q.get() == 0.0 {
        return f64::INFINITY;
    }
    1.0 / q.get() - 1.0
}

/// Standard deviation `σ = sqrt(1/q - 1)` of a scalar Gaussian with clarity `q`.
pub fn stddev_from_clarity(q: ClarityValue) -> f64 {
    error_bound_from_clarity(q).max(0.0).sqrt()
}
