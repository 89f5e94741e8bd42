use serde::Serialize;

use super::{
    bisect, EnsembleParams, FIXED_POINT_TOL, LENGTH_MAX_ITERS, LENGTH_RESIDUAL_TOL,
};
use crate::error::{invalid, Error, Result};

/// Squared lengths beyond this are treated as unbounded growth.
const DIVERGENCE_CAP: f64 = 1e150;
use crate::quadrature::Quadrature;

/// Layerwise squared lengths `q^1..q^D` predicted by the length map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthTrajectory {
    pub q0: f64,
    /// `values[l - 1]` is `q^l`.
    pub values: Vec<f64>,
    pub q_star: f64,
    /// First layer whose length is within 1% of `q_star` (absolute `1e-8`
    /// when `q_star = 0`). Iteration continues past the requested depth if
    /// needed; `None` if never reached within the iteration cap.
    pub iterations_to_1pct: Option<usize>,
}

/// `V(q) = σ_w² E[φ(√q z)²] + σ_b²`.
pub fn length_map(q: f64, params: &EnsembleParams, quad: &Quadrature) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(invalid("q", format!("squared length must be >= 0, got {q}")));
    }
    let phi = &params.nonlinearity;
    let m = quad.expect_scaled(
        |u| {
            let v = phi.value(u);
            v * v
        },
        q,
    )?;
    Ok(params.sw2() * m + params.sb2())
}

/// Stable fixed point `q*` of the length map.
///
/// Iterates from `q = 1` until successive change drops below `1e-12`,
/// falling back to bracketing bisection when the iteration is too slow.
pub fn length_fixed_point(params: &EnsembleParams, quad: &Quadrature) -> Result<f64> {
    params.validate()?;
    let v = |q: f64| length_map(q, params, quad);
    let mut q = 1.0;
    let mut converged = false;
    for _ in 0..LENGTH_MAX_ITERS {
        let next = match v(q) {
            Ok(x) => x,
            Err(Error::NonFiniteIntegrand { value, .. }) => value,
            Err(e) => return Err(e),
        };
        if !next.is_finite() || next > DIVERGENCE_CAP {
            return Err(Error::NoConvergence {
                what: "length fixed point",
                iterations: LENGTH_MAX_ITERS,
                last: next,
            });
        }
        let step = (next - q).abs();
        q = next;
        if step < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    if converged && collapses_to_origin(q, params, quad)? {
        return Ok(0.0);
    }
    if converged && (v(q)? - q).abs() < LENGTH_RESIDUAL_TOL {
        return Ok(q);
    }
    bracket_fixed_point(q, params, quad)
}

/// True when the map has `V(0) = 0` and `V(q) < q` everywhere on `(0, q]`,
/// i.e. the iterate is creeping toward the origin.
fn collapses_to_origin(q: f64, params: &EnsembleParams, quad: &Quadrature) -> Result<bool> {
    if q > 1e-6 || length_map(0.0, params, quad)? != 0.0 {
        return Ok(false);
    }
    let mut x = q;
    for _ in 0..64 {
        if x <= 0.0 {
            break;
        }
        if length_map(x, params, quad)? >= x {
            return Ok(false);
        }
        x *= 0.5;
    }
    Ok(true)
}

fn bracket_fixed_point(last: f64, params: &EnsembleParams, quad: &Quadrature) -> Result<f64> {
    let no_conv = || Error::NoConvergence {
        what: "length fixed point",
        iterations: LENGTH_MAX_ITERS,
        last,
    };
    let f = |q: f64| Ok(length_map(q, params, quad)? - q);
    let f_last = f(last)?;
    let (lo, hi) = if f_last < 0.0 {
        // Root below: walk down until V(q) > q.
        let mut lo = last;
        loop {
            lo *= 0.5;
            if lo < 1e-300 {
                return if length_map(0.0, params, quad)? == 0.0 {
                    Ok(0.0)
                } else {
                    Err(no_conv())
                };
            }
            if f(lo)? > 0.0 {
                break (lo, 2.0 * lo);
            }
        }
    } else if f_last > 0.0 {
        let mut hi = last.max(1e-300);
        loop {
            hi *= 2.0;
            if !hi.is_finite() || hi > 1e300 {
                return Err(no_conv());
            }
            let fh = match f(hi) {
                Ok(x) => x,
                Err(Error::NonFiniteIntegrand { .. }) => return Err(no_conv()),
                Err(e) => return Err(e),
            };
            if !fh.is_finite() || hi > DIVERGENCE_CAP {
                return Err(no_conv());
            }
            if fh < 0.0 {
                break (0.5 * hi, hi);
            }
        }
    } else {
        return Ok(last);
    };
    let root = bisect(lo, hi, 1e-16 * hi, 2000, "V(q) - q", f)?;
    if (length_map(root, params, quad)? - root).abs() < LENGTH_RESIDUAL_TOL {
        Ok(root)
    } else {
        Err(no_conv())
    }
}

/// Iterates the length map from `q^1 = σ_w² q0 + σ_b²` for `depth` layers.
pub fn length_trajectory(
    q0: f64,
    depth: usize,
    params: &EnsembleParams,
    quad: &Quadrature,
) -> Result<LengthTrajectory> {
    if depth == 0 {
        return Err(invalid("depth", "must be >= 1"));
    }
    if !(q0 >= 0.0) {
        return Err(invalid("q0", format!("must be >= 0, got {q0}")));
    }
    let q_star = length_fixed_point(params, quad)?;
    let close = |q: f64| {
        if q_star > 0.0 {
            (q - q_star).abs() / q_star <= 0.01
        } else {
            q.abs() <= 1e-8
        }
    };
    let mut values = Vec::with_capacity(depth);
    let mut q = params.sw2() * q0 + params.sb2();
    let mut hit = None;
    for l in 1..=depth {
        if l > 1 {
            q = length_map(q, params, quad)?;
        }
        if hit.is_none() && close(q) {
            hit = Some(l);
        }
        values.push(q);
    }
    let mut l = depth;
    while hit.is_none() && l < LENGTH_MAX_ITERS {
        l += 1;
        q = length_map(q, params, quad)?;
        if close(q) {
            hit = Some(l);
        }
    }
    Ok(LengthTrajectory {
        q0,
        values,
        q_star,
        iterations_to_1pct: hit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Nonlinearity;
    use std::f64::consts::PI;

    fn trapezoid_gauss(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        let g = |z: f64| f(z) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let mut s = 0.5 * (g(a) + g(b));
        for i in 1..n {
            s += g(a + i as f64 * h);
        }
        s * h
    }

    fn rule() -> Quadrature {
        Quadrature::default()
    }

    #[test]
    fn linear_map_is_affine() {
        let p = EnsembleParams::new(0.5, 0.1, Nonlinearity::linear()).unwrap();
        assert!((length_map(2.0, &p, &rule()).unwrap() - 0.51).abs() < 1e-14);
        assert!(length_map(-1.0, &p, &rule()).is_err());
    }

    #[test]
    fn tanh_map_examples() {
        let p = EnsembleParams::tanh(1.3, 0.0).unwrap();
        assert_eq!(length_map(0.0, &p, &rule()).unwrap(), 0.0);
        let p = EnsembleParams::tanh(4.0, 0.3).unwrap();
        let oracle = 16.0 * trapezoid_gauss(|z| z.tanh().powi(2), 1_000_000) + 0.09;
        let got = length_map(1.0, &p, &rule()).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn fixed_points() {
        let r = rule();
        for sw in [0.5, 0.9] {
            let p = EnsembleParams::tanh(sw, 0.0).unwrap();
            assert_eq!(length_fixed_point(&p, &r).unwrap(), 0.0);
        }
        let p = EnsembleParams::new(0.5, 0.3, Nonlinearity::linear()).unwrap();
        assert!((length_fixed_point(&p, &r).unwrap() - 0.12).abs() < 1e-11);

        // Bisection on a trapezoid-evaluated map, independent of the iteration.
        let v = |q: f64| 16.0 * trapezoid_gauss(|z| (q.sqrt() * z).tanh().powi(2), 200_000) + 0.09;
        let (mut lo, mut hi) = (0.1, 100.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if v(mid) - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let p = EnsembleParams::tanh(4.0, 0.3).unwrap();
        let q = length_fixed_point(&p, &r).unwrap();
        assert!(q > 0.0);
        assert!((q - oracle).abs() < 1e-9, "{q} vs {oracle}");
        assert!((length_map(q, &p, &r).unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn positive_fixed_point_above_unit_weight() {
        let r = rule();
        for sw in [1.5, 3.0, 1.0 + 1e-3] {
            let p = EnsembleParams::tanh(sw, 0.0).unwrap();
            let q = length_fixed_point(&p, &r).unwrap();
            assert!(q > 0.0, "sigma_w {sw}");
            assert!((length_map(q, &p, &r).unwrap() - q).abs() < 1e-10);
        }
    }

    #[test]
    fn expansive_linear_map_fails() {
        let p = EnsembleParams::new(1.5, 0.0, Nonlinearity::linear()).unwrap();
        assert!(matches!(
            length_fixed_point(&p, &rule()),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn trajectories() {
        let r = rule();
        let p = EnsembleParams::tanh(0.5, 0.0).unwrap();
        let t = length_trajectory(3.0, 30, &p, &r).unwrap();
        assert_eq!(t.q_star, 0.0);
        assert!(t.values.windows(2).all(|w| w[1] < w[0]));

        let p = EnsembleParams::new(1.0, 0.0, Nonlinearity::linear()).unwrap();
        let t = length_trajectory(2.5, 6, &p, &r).unwrap();
        assert!(t.values.iter().all(|&q| (q - 2.5).abs() < 1e-12));

        let p = EnsembleParams::tanh(4.0, 0.3).unwrap();
        let qs = length_fixed_point(&p, &r).unwrap();
        let q0 = (qs - 0.09) / 16.0;
        let t = length_trajectory(q0, 8, &p, &r).unwrap();
        assert!(t.values.iter().all(|q| (q - qs).abs() < 1e-9));
        assert_eq!(t.iterations_to_1pct, Some(1));
        assert!(t.values.iter().all(|&q| q >= 0.09));
    }

    #[test]
    fn length_map_monotone_for_monotone_phi() {
        let r = rule();
        let p = EnsembleParams::tanh(2.5, 0.3).unwrap();
        let qs: Vec<f64> = (0..60).map(|i| 0.05 * i as f64 * (1.0 + 0.1 * i as f64)).collect();
        let vs: Vec<f64> = qs.iter().map(|&q| length_map(q, &p, &r).unwrap()).collect();
        assert!(vs.windows(2).all(|w| w[1] >= w[0]));
    }
}
