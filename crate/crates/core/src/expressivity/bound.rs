use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::activations::Nonlinearity;
use crate::error::{invalid, Error, Result};
use crate::grid::theta_grid;
use crate::simulator::{stream_rng, STREAM_AUX};
use crate::stats::CompensatedSum;

const STREAM_SHALLOW: u64 = STREAM_AUX + (1 << 24);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShallowBoundSpec {
    pub n_hidden: usize,
    /// Maximum sign changes of any 1-D projection of the input velocity.
    pub sign_changes: usize,
    pub dynamic_range: f64,
}

impl ShallowBoundSpec {
    pub fn new(n_hidden: usize, sign_changes: usize, dynamic_range: f64) -> Result<Self> {
        if !(dynamic_range > 0.0) || !dynamic_range.is_finite() {
            return Err(invalid("dynamic_range", format!("must be finite and > 0, got {dynamic_range}")));
        }
        Ok(Self {
            n_hidden,
            sign_changes,
            dynamic_range,
        })
    }
}

/// `L^E ≤ N₁ (1 + s) R`.
pub fn shallow_length_bound(spec: &ShallowBoundSpec) -> f64 {
    spec.n_hidden as f64 * (1 + spec.sign_changes) as f64 * spec.dynamic_range
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShallowBoundReport {
    pub n_hidden: usize,
    pub bound: f64,
    /// `L^E` of `x¹(θ)` per trial.
    pub lengths: Vec<f64>,
    pub max_length: f64,
    /// `max L^E / √N₁`.
    pub max_length_norm: f64,
    pub violations: usize,
}

/// Samples `n_trials` one-layer networks `x¹ = φ(W x⁰ + b)` on a circle
/// input of per-neuron squared radius `q0` and measures `L^E` of `x¹(θ)`.
///
/// The circle spans a 2-D subspace, so only `W u⁰` and `W u¹` matter; both
/// are drawn directly as i.i.d. `N(0, σ_w²)` vectors (exact in
/// distribution for orthonormal `u⁰, u¹`). Lengths use the periodic
/// trapezoid rule on `n_theta` samples of `‖φ′(h¹) ⊙ ∂_θh¹‖`.
#[allow(clippy::too_many_arguments)]
pub fn verify_shallow_bound(
    n_trials: usize,
    n_hidden: usize,
    sigma_w: f64,
    sigma_b: f64,
    nonlinearity: &Nonlinearity,
    q0: f64,
    n_theta: usize,
    seed: u64,
) -> Result<ShallowBoundReport> {
    let range = match nonlinearity.dynamic_range() {
        Some(r) if nonlinearity.monotone_nondecreasing() => r,
        _ => {
            return Err(Error::UnsupportedActivation {
                name: nonlinearity.name().to_string(),
                operation: "shallow length bound (needs monotone phi with finite range)",
            })
        }
    };
    if n_trials == 0 || n_hidden == 0 || n_theta < 8 {
        return Err(invalid("trials", "need n_trials >= 1, n_hidden >= 1, n_theta >= 8"));
    }
    if !(sigma_w >= 0.0) || !(sigma_b >= 0.0) || !(q0 > 0.0) {
        return Err(invalid("params", "need sigma_w, sigma_b >= 0 and q0 > 0"));
    }
    let bound = shallow_length_bound(&ShallowBoundSpec::new(n_hidden, 1, range)?);
    let thetas = theta_grid(n_theta);
    let amp = sigma_w * q0.sqrt();
    let lengths: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, STREAM_SHALLOW + trial as u64);
            let mut draw = |s: f64| -> Vec<f64> {
                (0..n_hidden)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        s * z
                    })
                    .collect()
            };
            let a = draw(amp);
            let c = draw(amp);
            let b = draw(sigma_b);
            let mut total = CompensatedSum::new();
            for &t in &thetas {
                let (s, co) = t.sin_cos();
                let mut sq = 0.0;
                for i in 0..n_hidden {
                    let h = a[i] * co + c[i] * s + b[i];
                    let v = nonlinearity.deriv1(h) * (-a[i] * s + c[i] * co);
                    sq += v * v;
                }
                total.add(sq.sqrt());
            }
            total.value() * 2.0 * PI / n_theta as f64
        })
        .collect();
    let max_length = lengths.iter().copied().fold(0.0, f64::max);
    Ok(ShallowBoundReport {
        n_hidden,
        bound,
        violations: lengths.iter().filter(|&&l| l > bound).count(),
        max_length_norm: max_length / (n_hidden as f64).sqrt(),
        max_length,
        lengths,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn growth_exponent(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("x", "need two equal-length series with >= 2 points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("x", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("x", "all x values are equal"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formula() {
        let b = |n, s, r| shallow_length_bound(&ShallowBoundSpec::new(n, s, r).unwrap());
        assert_eq!(b(1000, 1, 2.0), 4000.0);
        assert_eq!(b(1, 0, 2.0), 2.0);
        assert_eq!(b(10, 3, 1.0), 40.0);
        assert!(ShallowBoundSpec::new(3, 1, 0.0).is_err());
    }

    #[test]
    fn zero_weights_have_zero_length() {
        let r = verify_shallow_bound(3, 50, 0.0, 0.3, &Nonlinearity::tanh(), 1.0, 64, 1).unwrap();
        assert!(r.lengths.iter().all(|&l| l == 0.0));
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn unbounded_range_is_unsupported() {
        assert!(matches!(
            verify_shallow_bound(3, 50, 1.0, 0.3, &Nonlinearity::relu(), 1.0, 64, 1),
            Err(Error::UnsupportedActivation { .. })
        ));
    }

    #[test]
    fn linear_regime_matches_closed_form() {
        // Tiny weights keep tanh linear: x¹ ≈ W x⁰, a circle of radius ≈ σ_w √(N q0).
        let r = verify_shallow_bound(4, 4000, 1e-4, 0.0, &Nonlinearity::tanh(), 1.0, 256, 3).unwrap();
        for l in &r.lengths {
            let want = 2.0 * PI * 1e-4 * (4000f64).sqrt();
            assert!((l / want - 1.0).abs() < 0.05, "{l} vs {want}");
        }
    }

    #[test]
    fn exponent_fit() {
        let x = [100.0, 400.0, 1600.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        assert!((growth_exponent(&x, &y).unwrap() - 0.5).abs() < 1e-12);
    }
}
