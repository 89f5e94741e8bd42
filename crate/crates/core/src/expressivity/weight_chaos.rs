use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::theta_grid;
use crate::meanfield::{length_fixed_point, CMap, EnsembleParams};
use crate::quadrature::Quadrature;
use crate::simulator::{gaussian_matrix, stream_rng, CircleManifold, NetworkRealization, STREAM_AUX};
use crate::stats::CompensatedSum;

const STREAM_PERTURB: u64 = STREAM_AUX + (1 << 32);

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.abs() <= 1.0) {
        return Err(invalid("delta", format!("must lie in [-1, 1], got {delta}")));
    }
    Ok(())
}

/// `C^l(Δ)` for `l = 1..=depth` when only the weights into layer 2 move.
///
/// `C¹ = 1`, `C² = (√(1−|Δ|) σ_w² E[φ(u)²] + σ_b²) / q*` with `u ~ N(0, q*)`,
/// and every later layer applies the C-map.
pub fn weight_chaos_theory(params: &EnsembleParams, delta: f64, depth: usize, quad: &Quadrature) -> Result<Vec<f64>> {
    check_delta(delta)?;
    if depth == 0 {
        return Err(invalid("depth", "must be >= 1"));
    }
    let cmap = CMap::new(params, quad)?;
    let q = cmap.q_star();
    if !(q > 0.0) {
        return Err(Error::ZeroFixedPoint { what: "weight chaos" });
    }
    let mut out = Vec::with_capacity(depth);
    out.push(1.0);
    if depth >= 2 {
        let phi = &params.nonlinearity;
        let m = quad.expect_scaled(
            |u| {
                let y = phi.value(u);
                y * y
            },
            q,
        )?;
        let mut c = (((1.0 - delta.abs()).sqrt() * params.sw2() * m + params.sb2()) / q).clamp(-1.0, 1.0);
        out.push(c);
        for _ in 2..depth {
            c = cmap.apply(c)?.clamp(-1.0, 1.0);
            out.push(c);
        }
    }
    Ok(out)
}

/// `√(1−|Δ|) W + √|Δ| dW`.
pub fn interpolated_weights(w: &DMatrix<f64>, dw: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    check_delta(delta)?;
    if w.shape() != dw.shape() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: dw.len(),
        });
    }
    Ok(w * (1.0 - delta.abs()).sqrt() + dw * delta.abs().sqrt())
}

/// A network family whose layer-2 weights interpolate between `W²` and an
/// independent draw `dW`, with theory and simulated output correlations.
#[derive(Debug, Clone)]
pub struct WeightChaosFamily {
    pub base: NetworkRealization,
    pub perturbation: DMatrix<f64>,
    pub deltas: Vec<f64>,
    pub q_star: f64,
    /// `C^D(Δ)` from the recursion, one per delta.
    pub theory: Vec<f64>,
    /// `Q^D(0,Δ) / √(Q^D(0,0) Q^D(Δ,Δ))` from the simulation.
    pub empirical: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightChaosRow {
    pub delta: f64,
    pub theory: f64,
    pub empirical: f64,
}

impl WeightChaosFamily {
    pub fn rows(&self) -> Vec<WeightChaosRow> {
        self.deltas
            .iter()
            .zip(self.theory.iter().zip(&self.empirical))
            .map(|(&delta, (&theory, &empirical))| WeightChaosRow {
                delta,
                theory,
                empirical,
            })
            .collect()
    }
}

/// θ-averaged `(1/N) Σᵢ a_i(θ) b_i(θ)`.
fn function_overlap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let s: CompensatedSum = a.iter().zip(b.iter()).map(|(x, y)| x * y).collect();
    s.value() / a.len() as f64
}

/// Simulates the family on a circle placed directly in `h¹` at radius `q*`.
///
/// `widths` lists the hidden widths `N_1..N_D` (`D >= 2`). The layer-1
/// weights are never used since the circle starts at `h¹`.
pub fn weight_chaos_empirical(
    params: &EnsembleParams,
    widths: &[usize],
    deltas: &[f64],
    n_theta: usize,
    seed: u64,
    quad: &Quadrature,
) -> Result<WeightChaosFamily> {
    if widths.len() < 2 {
        return Err(invalid("widths", "need at least two layers"));
    }
    if n_theta < 4 {
        return Err(invalid("n_theta", "need >= 4 samples"));
    }
    for &d in deltas {
        check_delta(d)?;
    }
    let q_star = length_fixed_point(params, quad)?;
    if !(q_star > 0.0) {
        return Err(Error::ZeroFixedPoint { what: "weight chaos" });
    }
    let depth = widths.len();
    let mut all = Vec::with_capacity(depth + 1);
    all.push(1);
    all.extend_from_slice(widths);
    let base = NetworkRealization::sample(&all, params, seed)?;
    let perturbation = gaussian_matrix(
        &mut stream_rng(seed, STREAM_PERTURB),
        widths[1],
        widths[0],
        params.sigma_w / (widths[0] as f64).sqrt(),
    );
    let thetas = theta_grid(n_theta);
    let h1 = CircleManifold::sample(widths[0], q_star, thetas.clone(), seed)?.points(&thetas);
    let output = |delta: f64| -> Result<DMatrix<f64>> {
        let mut net = base.clone();
        net.weights[1] = interpolated_weights(&base.weights[1], &perturbation, delta)?;
        Ok(net.propagate_from(1, h1.clone())?.pop().expect("depth >= 2"))
    };
    let reference = output(0.0)?;
    let q00 = function_overlap(&reference, &reference);
    let mut empirical = Vec::with_capacity(deltas.len());
    let mut theory = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let h = if d == 0.0 { reference.clone() } else { output(d)? };
        let qdd = function_overlap(&h, &h);
        let q0d = function_overlap(&reference, &h);
        empirical.push(q0d / (q00 * qdd).sqrt());
        theory.push(*weight_chaos_theory(params, d, depth, quad)?.last().expect("depth >= 1"));
    }
    Ok(WeightChaosFamily {
        base,
        perturbation,
        deltas: deltas.to_vec(),
        q_star,
        theory,
        empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chaotic() -> EnsembleParams {
        EnsembleParams::tanh(4.0, 0.3).unwrap()
    }

    #[test]
    fn zero_delta_is_identity() {
        let q = Quadrature::default();
        let c = weight_chaos_theory(&chaotic(), 0.0, 8, &q).unwrap();
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-10), "{c:?}");
    }

    #[test]
    fn full_swap_without_bias_starts_from_zero() {
        let q = Quadrature::default();
        let p = EnsembleParams::tanh(3.0, 0.0).unwrap();
        let c = weight_chaos_theory(&p, 1.0, 5, &q).unwrap();
        assert_eq!(c[0], 1.0);
        assert!(c[1].abs() < 1e-14);
        // Odd φ without bias keeps c = 0 fixed.
        assert!(c[2..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn theory_is_even_and_follows_cmap() {
        let q = Quadrature::default();
        let p = chaotic();
        let a = weight_chaos_theory(&p, 0.3, 6, &q).unwrap();
        let b = weight_chaos_theory(&p, -0.3, 6, &q).unwrap();
        assert_eq!(a, b);
        let traj = CMap::new(&p, &q).unwrap().trajectory(a[1], 5).unwrap();
        for (x, y) in a[1..].iter().zip(&traj.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_preserves_variance() {
        let mut rng = stream_rng(4, 0);
        let w = gaussian_matrix(&mut rng, 300, 300, 1.0);
        let dw = gaussian_matrix(&mut rng, 300, 300, 1.0);
        for d in [0.1, 0.5, -0.9] {
            let m = interpolated_weights(&w, &dw, d).unwrap();
            let var = m.iter().map(|x| x * x).sum::<f64>() / m.len() as f64;
            assert!((var - 1.0).abs() < 0.02, "{d}: {var}");
        }
        assert!(interpolated_weights(&w, &dw, 1.5).is_err());
    }

    #[test]
    fn empirical_zero_delta_is_exactly_one() {
        let q = Quadrature::default();
        let fam = weight_chaos_empirical(&chaotic(), &[60, 60, 60], &[0.0, 0.2], 16, 3, &q).unwrap();
        assert_eq!(fam.empirical[0], 1.0);
        assert!(fam.empirical[1] < 1.0);
    }
}
