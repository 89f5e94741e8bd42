use std::f64::consts::PI;

use serde::Serialize;

use super::{CMap, ChiFactors, EnsembleParams};
use crate::error::{invalid, Error, Result};
use crate::quadrature::Quadrature;

/// Layerwise metric and curvature of a circle started at radius `q*`.
///
/// All per-layer vectors are indexed by `l - 1`. Quantities carry the
/// per-neuron normalization: `ḡ^E = g^E/N`, `κ̄² = N κ²`,
/// `L̄^E = L^E/√N`; the Gauss length `L^G` needs no normalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureTrajectory {
    pub g_e: Vec<f64>,
    pub kappa_sq: Vec<f64>,
    pub le_norm: Vec<f64>,
    pub lg: Vec<f64>,
    /// `3χ₂ / (χ₁(χ₁ - 1))`; `None` when `χ₁ <= 1` and the recursion diverges.
    pub kappa_star_sq: Option<f64>,
    pub chi: ChiFactors,
}

/// One step of the curvature recursion: `κ̄² ↦ 3χ₂/χ₁² + κ̄²/χ₁`.
#[inline]
pub fn curvature_step(kappa_sq: f64, chi1: f64, chi2: f64) -> f64 {
    3.0 * chi2 / (chi1 * chi1) + kappa_sq / chi1
}

pub fn curvature_trajectory(
    depth: usize,
    params: &EnsembleParams,
    quad: &Quadrature,
) -> Result<CurvatureTrajectory> {
    if depth == 0 {
        return Err(invalid("depth", "must be >= 1"));
    }
    params.nonlinearity.require_smooth("curvature recursion")?;
    let cm = CMap::new(params, quad)?;
    let q_star = cm.q_star();
    if q_star <= 0.0 {
        return Err(Error::ZeroFixedPoint {
            what: "curvature recursion",
        });
    }
    let chi = cm.chi_factors()?;
    let chi1 = chi.chi1;
    let chi2 = chi.chi2.expect("smooth nonlinearity has chi2");
    if chi1 <= 0.0 {
        return Err(Error::Numerical("chi1 = 0: curvature recursion undefined".into()));
    }
    let mut g_e = Vec::with_capacity(depth);
    let mut kappa_sq = Vec::with_capacity(depth);
    let (mut g, mut k) = (q_star, 1.0 / q_star);
    for l in 0..depth {
        if l > 0 {
            g *= chi1;
            k = curvature_step(k, chi1, chi2);
        }
        g_e.push(g);
        kappa_sq.push(k);
    }
    let le_norm = g_e.iter().map(|g| 2.0 * PI * g.sqrt()).collect();
    let lg = g_e
        .iter()
        .zip(&kappa_sq)
        .map(|(g, k)| 2.0 * PI * (g * k).sqrt())
        .collect();
    let kappa_star_sq = (chi1 > 1.0).then(|| 3.0 * chi2 / (chi1 * (chi1 - 1.0)));
    Ok(CurvatureTrajectory {
        g_e,
        kappa_sq,
        le_norm,
        lg,
        kappa_star_sq,
        chi,
    })
}
