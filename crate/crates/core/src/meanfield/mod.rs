//! Mean-field maps for signal propagation through wide random networks.
//!
//! The length map `V(q)` tracks the per-neuron squared length of a single
//! input, the correlation map tracks the overlap of two inputs, and the
//! curvature recursion tracks the Euclidean metric and extrinsic curvature
//! of a circle started at the fixed-point radius. The phase module sweeps
//! the `(σ_w, σ_b)` plane.

mod correlation;
mod curvature;
mod length;
mod phase;

pub use correlation::{
    c_map, chi1, chi2, chi_factors, correlation_map, correlation_trajectory, CMap, ChiFactors,
    CorrelationTrajectory,
};
pub use curvature::{curvature_step, curvature_trajectory, CurvatureTrajectory};
pub use length::{length_fixed_point, length_map, length_trajectory, LengthTrajectory};
pub use phase::{phase_boundary, phase_grid, PhaseCell, PhaseGrid};

use crate::activations::Nonlinearity;
use crate::error::{invalid, Result};

/// Successive-change tolerance for fixed-point iterations.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Residual `|V(q*) - q*|` accepted for a length fixed point.
pub const LENGTH_RESIDUAL_TOL: f64 = 1e-10;
pub const LENGTH_MAX_ITERS: usize = 10_000;
pub const CORRELATION_MAX_ITERS: usize = 100_000;

/// A point `(σ_w, σ_b)` of the weight/bias phase plane with its nonlinearity.
#[derive(Debug, Clone)]
pub struct EnsembleParams {
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub nonlinearity: Nonlinearity,
}

impl EnsembleParams {
    pub fn new(sigma_w: f64, sigma_b: f64, nonlinearity: Nonlinearity) -> Result<Self> {
        let p = Self {
            sigma_w,
            sigma_b,
            nonlinearity,
        };
        p.validate()?;
        Ok(p)
    }

    /// Shorthand for the tanh ensemble used throughout the experiments.
    pub fn tanh(sigma_w: f64, sigma_b: f64) -> Result<Self> {
        Self::new(sigma_w, sigma_b, Nonlinearity::tanh())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w > 0.0) || !self.sigma_w.is_finite() {
            return Err(invalid("sigma_w", format!("must be > 0, got {}", self.sigma_w)));
        }
        if !(self.sigma_b >= 0.0) || !self.sigma_b.is_finite() {
            return Err(invalid("sigma_b", format!("must be >= 0, got {}", self.sigma_b)));
        }
        Ok(())
    }

    pub fn with_sigma_w(&self, sigma_w: f64) -> Self {
        Self {
            sigma_w,
            ..self.clone()
        }
    }

    pub fn with_sigma_b(&self, sigma_b: f64) -> Self {
        Self {
            sigma_b,
            ..self.clone()
        }
    }

    #[inline]
    pub(crate) fn sw2(&self) -> f64 {
        self.sigma_w * self.sigma_w
    }

    #[inline]
    pub(crate) fn sb2(&self) -> f64 {
        self.sigma_b * self.sigma_b
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `xtol`.
pub(crate) fn bisect(
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iters: usize,
    what: &'static str,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(crate::error::Error::NoBracket { what, lo, hi });
    }
    for _ in 0..max_iters {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
