use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::theta_grid;
use crate::simulator::{stream_rng, CircleManifold, NetworkRealization, STREAM_AUX};

/// Default ridge is this fraction of `trace(AᵀA) / width`.
pub const DEFAULT_RIDGE_FRACTION: f64 = 1e-6;
const STREAM_TARGET: u64 = STREAM_AUX + (1 << 28);

/// Basis `{1, cos kθ, sin kθ}` for `k = 1..=ω_max` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierProbe {
    pub omega_max: usize,
    pub thetas: Vec<f64>,
    /// `T × (2ω_max + 1)`: column 0 is the constant, then `cos kθ, sin kθ` pairs.
    pub basis: DMatrix<f64>,
    /// `None` selects the default `1e-6 · trace(AᵀA) / width`.
    pub ridge: Option<f64>,
}

impl FourierProbe {
    pub fn new(omega_max: usize, n_theta: usize, ridge: Option<f64>) -> Result<Self> {
        if omega_max == 0 {
            return Err(invalid("omega_max", "must be >= 1"));
        }
        if n_theta <= 2 * omega_max + 1 {
            return Err(invalid(
                "n_theta",
                format!("need more than 2*omega_max + 1 = {} samples, got {n_theta}", 2 * omega_max + 1),
            ));
        }
        if let Some(l) = ridge {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(invalid("ridge", format!("must be finite and >= 0, got {l}")));
            }
        }
        let thetas = theta_grid(n_theta);
        let basis = DMatrix::from_fn(n_theta, 2 * omega_max + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                let k = j.div_ceil(2) as f64;
                if j % 2 == 1 {
                    (k * thetas[i]).cos()
                } else {
                    (k * thetas[i]).sin()
                }
            }
        });
        Ok(Self {
            omega_max,
            thetas,
            basis,
            ridge,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyError {
    pub k: usize,
    pub error_cos: f64,
    /// `None` for the constant (`k = 0`) column.
    pub error_sin: Option<f64>,
    /// Mean over the basis columns of this frequency.
    pub error: f64,
}

/// `1 − (ŷ·y)² / (‖ŷ‖²‖y‖²)`; `1` when either vector vanishes.
fn squared_angle_error(pred: &[f64], target: &[f64]) -> f64 {
    let d: f64 = pred.iter().zip(target).map(|(a, b)| a * b).sum();
    let pp: f64 = pred.iter().map(|a| a * a).sum();
    let tt: f64 = target.iter().map(|a| a * a).sum();
    if pp == 0.0 || tt == 0.0 {
        return 1.0;
    }
    (1.0 - d * d / (pp * tt)).clamp(0.0, 1.0)
}

/// Ridge predictions of the columns of `targets` from the columns of
/// `features` with an unpenalized intercept. Uses the `T × T` dual system
/// when there are more features than samples.
fn ridge_predict(features: &DMatrix<f64>, targets: &DMatrix<f64>, ridge: Option<f64>) -> Result<DMatrix<f64>> {
    let (t, m) = features.shape();
    if targets.nrows() != t {
        return Err(Error::DimensionMismatch {
            expected: t,
            got: targets.nrows(),
        });
    }
    let center = |x: &DMatrix<f64>| {
        let mut c = x.clone();
        let means: Vec<f64> = c.column_iter().map(|col| col.mean()).collect();
        for (mut col, mu) in c.column_iter_mut().zip(&means) {
            col.add_scalar_mut(-mu);
        }
        (c, means)
    };
    let (a, _) = center(features);
    let (y, y_means) = center(targets);
    let trace: f64 = a.iter().map(|v| v * v).sum();
    let lambda = ridge.unwrap_or(DEFAULT_RIDGE_FRACTION * trace / m.max(1) as f64);
    let fitted = if m <= t {
        let mut gram = a.tr_mul(&a);
        for i in 0..m {
            gram[(i, i)] += lambda;
        }
        let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
        &a * chol.solve(&a.tr_mul(&y))
    } else {
        let k = &a * a.transpose();
        let mut reg = k.clone();
        for i in 0..t {
            reg[(i, i)] += lambda;
        }
        let chol = reg.cholesky().ok_or(Error::RankDeficient)?;
        k * chol.solve(&y)
    };
    if lambda == 0.0 && fitted.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let mut out = fitted;
    for (mut col, mu) in out.column_iter_mut().zip(&y_means) {
        col.add_scalar_mut(*mu);
    }
    Ok(out)
}

/// Regresses every basis column onto the activations (rows = θ samples,
/// columns = neurons) and reports the squared-angle error per frequency.
pub fn fourier_error_profile(activations: &DMatrix<f64>, probe: &FourierProbe) -> Result<Vec<FrequencyError>> {
    if activations.nrows() != probe.thetas.len() {
        return Err(Error::DimensionMismatch {
            expected: probe.thetas.len(),
            got: activations.nrows(),
        });
    }
    if probe.ridge == Some(0.0) {
        // An exactly singular Gram can still factor in floating point; check rank.
        let (t, m) = activations.shape();
        let mut a = activations.clone();
        for mut col in a.column_iter_mut() {
            let mu = col.mean();
            col.add_scalar_mut(-mu);
        }
        let sv = a.singular_values();
        let tol = sv.max() * t.max(m) as f64 * f64::EPSILON;
        if sv.iter().filter(|&&s| s > tol).count() < m.min(t) {
            return Err(Error::RankDeficient);
        }
    }
    let pred = ridge_predict(activations, &probe.basis, probe.ridge)?;
    let err = |j: usize| squared_angle_error(pred.column(j).as_slice(), probe.basis.column(j).as_slice());
    let mut out = Vec::with_capacity(probe.omega_max + 1);
    let e0 = err(0);
    out.push(FrequencyError {
        k: 0,
        error_cos: e0,
        error_sin: None,
        error: e0,
    });
    for k in 1..=probe.omega_max {
        let (c, s) = (err(2 * k - 1), err(2 * k));
        out.push(FrequencyError {
            k,
            error_cos: c,
            error_sin: Some(s),
            error: 0.5 * (c + s),
        });
    }
    Ok(out)
}

/// Error of regressing a random Fourier series (i.i.d. standard normal
/// coefficients for every basis column with `k >= 1`) onto the activations.
pub fn random_target_error(activations: &DMatrix<f64>, probe: &FourierProbe, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, STREAM_TARGET);
    let cols = probe.basis.ncols();
    let coef = DMatrix::from_fn(cols, 1, |j, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        if j == 0 {
            0.0
        } else {
            z
        }
    });
    let target = &probe.basis * coef;
    let pred = ridge_predict(activations, &target, probe.ridge)?;
    Ok(squared_angle_error(pred.as_slice(), target.as_slice()))
}

/// Output activations `x^D(θ)` (rows = θ, columns = neurons) for an input
/// circle of per-neuron squared radius `q0` in the input layer.
pub fn circle_input_activations(net: &NetworkRealization, q0: f64, thetas: &[f64], seed: u64) -> Result<DMatrix<f64>> {
    let circle = CircleManifold::sample(net.width(0), q0, thetas.to_vec(), seed)?;
    Ok(net.output(&circle.points(thetas))?.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthogonal() {
        let p = FourierProbe::new(10, 64, None).unwrap();
        let g = p.basis.tr_mul(&p.basis);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i != j {
                    assert!(g[(i, j)].abs() < 1e-10);
                }
            }
        }
        assert!(FourierProbe::new(10, 21, None).is_err());
    }

    #[test]
    fn containing_basis_gives_zero_error() {
        let p = FourierProbe::new(8, 64, None).unwrap();
        let errs = fourier_error_profile(&p.basis.columns(1, 16).into_owned(), &p).unwrap();
        assert!(errs.iter().all(|e| e.error < 1e-8), "{errs:?}");
    }

    #[test]
    fn constant_activations_give_unit_error() {
        let p = FourierProbe::new(8, 64, None).unwrap();
        let a = DMatrix::from_element(64, 20, 0.4);
        let errs = fourier_error_profile(&a, &p).unwrap();
        assert!(errs[1..].iter().all(|e| e.error == 1.0));
        assert_eq!(errs[0].error, 0.0);
        let p0 = FourierProbe::new(8, 64, Some(0.0)).unwrap();
        assert!(matches!(fourier_error_profile(&a, &p0), Err(Error::RankDeficient)));
    }

    #[test]
    fn scale_invariance_and_dual_consistency() {
        let p = FourierProbe::new(6, 40, None).unwrap();
        let mut rng = stream_rng(1, 1);
        let a = crate::simulator::gaussian_matrix(&mut rng, 40, 15, 1.0).map(|v: f64| v.tanh());
        let e1 = fourier_error_profile(&a, &p).unwrap();
        let e2 = fourier_error_profile(&(&a * 7.5), &p).unwrap();
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x.error - y.error).abs() < 1e-9);
        }
        // Primal and dual ridge solutions agree.
        let wide = crate::simulator::gaussian_matrix(&mut rng, 40, 60, 1.0);
        let lam = Some(0.3);
        let dual = ridge_predict(&wide, &p.basis, lam).unwrap();
        let (a, _) = (wide.clone(), ());
        let mut c = a.clone();
        for mut col in c.column_iter_mut() {
            let mu = col.mean();
            col.add_scalar_mut(-mu);
        }
        let mut g = c.tr_mul(&c);
        for i in 0..60 {
            g[(i, i)] += 0.3;
        }
        let mut y = p.basis.clone();
        let means: Vec<f64> = y.column_iter().map(|col| col.mean()).collect();
        for (mut col, mu) in y.column_iter_mut().zip(&means) {
            col.add_scalar_mut(-mu);
        }
        let mut primal = &c * g.cholesky().unwrap().solve(&c.tr_mul(&y));
        for (mut col, mu) in primal.column_iter_mut().zip(&means) {
            col.add_scalar_mut(*mu);
        }
        assert!((dual - primal).amax() < 1e-9);
    }
}
