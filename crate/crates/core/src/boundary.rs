//! Curvature of a flat output-layer decision boundary pulled back into
//! earlier layers.
//!
//! The readout `G(x) = β·x^D(x) − β₀` is viewed as a function of the
//! activations `x` at some layer `l` (`x⁰` for `l = 0`). Boundary points are
//! found by gradient descent on `G²`; principal curvatures are the
//! eigenvalues of `‖∇G‖⁻¹ P ∇²G P` with `P = I − n̂n̂ᵀ` and `n̂ = ∇G/‖∇G‖`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::simulator::{stream_rng, NetworkRealization, STREAM_AUX};

/// Boundary residual tolerance relative to the readout scale.
pub const BOUNDARY_RTOL: f64 = 1e-8;
/// Hessian finite-difference step is `HESSIAN_STEP · (1 + ‖x‖)`.
pub const HESSIAN_STEP: f64 = 1e-4;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Normal-direction eigenvalue must satisfy `|λ| < 1e-6 max|λ| + 1e-12`.
const NORMAL_EIG_RTOL: f64 = 1e-6;
const NORMAL_EIG_ATOL: f64 = 1e-12;
/// Stream offset for boundary-search initial points.
const STREAM_BOUNDARY: u64 = STREAM_AUX + (1 << 20);

#[derive(Debug, Clone, PartialEq)]
pub struct LinearReadout {
    pub beta: DVector<f64>,
    pub beta0: f64,
}

impl LinearReadout {
    pub fn new(beta: DVector<f64>, beta0: f64) -> Result<Self> {
        if !(beta.norm() > 0.0) || !beta.iter().all(|b| b.is_finite()) || !beta0.is_finite() {
            return Err(invalid("beta", "readout weights must be finite with nonzero norm"));
        }
        Ok(Self { beta, beta0 })
    }

    /// `β ~ N(0, I/N)` and `β₀ = 0`, drawn from a dedicated stream of `seed`.
    pub fn random(width: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, STREAM_BOUNDARY - 1);
        let s = 1.0 / (width.max(1) as f64).sqrt();
        let beta = DVector::from_fn(width, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            s * z
        });
        Self::new(beta, 0.0)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.beta * c, self.beta0 * c)
    }
}

/// A scalar function whose zero level set is the boundary.
pub trait DecisionFunction: Sync {
    fn dim(&self) -> usize;
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)>;
    /// Scale that the residual tolerance is relative to.
    fn scale(&self) -> f64 {
        1.0
    }
}

/// `G(x) = β·x^D − β₀` as a function of the layer-`layer` activations.
#[derive(Debug, Clone, Copy)]
pub struct SuffixReadout<'a> {
    pub net: &'a NetworkRealization,
    pub layer: usize,
    pub readout: &'a LinearReadout,
}

impl<'a> SuffixReadout<'a> {
    pub fn new(net: &'a NetworkRealization, layer: usize, readout: &'a LinearReadout) -> Result<Self> {
        if layer > net.depth() {
            return Err(invalid("layer", format!("must be <= depth {}", net.depth())));
        }
        if readout.beta.len() != net.width(net.depth()) {
            return Err(Error::DimensionMismatch {
                expected: net.width(net.depth()),
                got: readout.beta.len(),
            });
        }
        Ok(Self { net, layer, readout })
    }
}

impl DecisionFunction for SuffixReadout<'_> {
    fn dim(&self) -> usize {
        self.net.width(self.layer)
    }

    fn scale(&self) -> f64 {
        self.readout.beta.norm()
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        readout_value_and_gradient(self.net, self.layer, self.readout, x)
    }
}

/// `G(x) = ‖x‖² − r²`, whose boundary is the sphere of radius `r`.
#[derive(Debug, Clone, Copy)]
pub struct SphereSurrogate {
    pub dim: usize,
    pub radius: f64,
}

impl DecisionFunction for SphereSurrogate {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        let v = DVector::from_column_slice(x);
        Ok((v.norm_squared() - self.radius * self.radius, v * 2.0))
    }
}

/// Value and exact gradient of `G` with respect to the layer-`layer`
/// activations, by reverse-mode chain rule through layers `layer+1..=D`.
pub fn readout_value_and_gradient(
    net: &NetworkRealization,
    layer: usize,
    readout: &LinearReadout,
    x: &[f64],
) -> Result<(f64, DVector<f64>)> {
    if x.len() != net.width(layer) {
        return Err(Error::DimensionMismatch {
            expected: net.width(layer),
            got: x.len(),
        });
    }
    let phi = &net.nonlinearity;
    let depth = net.depth();
    let mut act = DVector::from_column_slice(x);
    let mut pre = Vec::with_capacity(depth - layer);
    for l in layer + 1..=depth {
        let h = &net.weights[l - 1] * &act + &net.biases[l - 1];
        act = h.map(|v| phi.value(v));
        pre.push(h);
    }
    let g = readout.beta.dot(&act) - readout.beta0;
    let mut grad = readout.beta.clone();
    for (k, l) in (layer + 1..depth + 1).enumerate().rev() {
        let d = pre[k].map(|v| phi.deriv1(v));
        grad = net.weights[l - 1].tr_mul(&grad.component_mul(&d));
    }
    Ok((g, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub layer: usize,
    pub x_star: Vec<f64>,
    pub residual: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Gradient descent on `G²/2` with Armijo backtracking. Each trial step
/// starts at the Gauss-Newton length `|G|/‖∇G‖`, so affine `G` converge in
/// one step.
pub fn find_boundary_point(
    f: &dyn DecisionFunction,
    layer: usize,
    x_init: &[f64],
    max_iters: usize,
) -> Result<BoundaryPoint> {
    if x_init.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x_init.len(),
        });
    }
    if !x_init.iter().all(|v| v.is_finite()) {
        return Err(invalid("x_init", "must be finite"));
    }
    let tol = BOUNDARY_RTOL * f.scale();
    let mut x = DVector::from_column_slice(x_init);
    let (mut g, mut grad) = f.value_and_gradient(x.as_slice())?;
    let mut best = g.abs();
    for it in 0..=max_iters {
        let gn2 = grad.norm_squared();
        if g.abs() < tol {
            return Ok(BoundaryPoint {
                layer,
                x_star: x.iter().copied().collect(),
                residual: g.abs(),
                grad_norm: gn2.sqrt(),
                iterations: it,
            });
        }
        if it == max_iters {
            break;
        }
        if !(gn2.sqrt() > 1e-14 * f.scale()) {
            return Err(Error::VanishingGradient { grad_norm: gn2.sqrt() });
        }
        let dir = &grad * (-g / gn2);
        let obj = 0.5 * g * g;
        // Directional derivative of G²/2 along dir is -G².
        let slope = -g * g;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &dir * t;
            let (gt, gradt) = f.value_and_gradient(trial.as_slice())?;
            if gt.is_finite() && 0.5 * gt * gt <= obj + ARMIJO * t * slope {
                accepted = Some((trial, gt, gradt));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((nx, ng, ngrad)) => {
                x = nx;
                g = ng;
                grad = ngrad;
                best = best.min(g.abs());
            }
            None => {
                return Err(Error::BoundaryNoConvergence {
                    best_residual: best,
                    iterations: it,
                })
            }
        }
    }
    Err(Error::BoundaryNoConvergence {
        best_residual: best,
        iterations: max_iters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalCurvatureReport {
    pub layer: usize,
    /// Sorted descending, length `N − 1`.
    pub kappas: Vec<f64>,
    /// `‖H − Hᵀ‖_F / ‖H‖_F` of the finite-difference Hessian before symmetrization.
    pub asymmetry: f64,
    /// `|cos|` between the removed eigenvector and the unit normal.
    pub normal_cosine: f64,
}

/// Finite-difference Hessian of `G`, column by column from gradient differences.
pub fn fd_hessian(f: &dyn DecisionFunction, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let eps = HESSIAN_STEP * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
    let cols: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += eps;
            xm[i] -= eps;
            let (_, gp) = f.value_and_gradient(&xp)?;
            let (_, gm) = f.value_and_gradient(&xm)?;
            Ok((gp - gm) / (2.0 * eps))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

pub fn principal_curvatures(f: &dyn DecisionFunction, point: &BoundaryPoint) -> Result<PrincipalCurvatureReport> {
    let n = f.dim();
    if point.x_star.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: point.x_star.len(),
        });
    }
    if n < 2 {
        return Err(invalid("dim", "principal curvatures need dimension >= 2"));
    }
    let (g, grad) = f.value_and_gradient(&point.x_star)?;
    if g.abs() >= BOUNDARY_RTOL * f.scale() {
        return Err(invalid("point", format!("residual {} exceeds the boundary tolerance", g.abs())));
    }
    let gnorm = grad.norm();
    if !(gnorm > 0.0) {
        return Err(Error::VanishingGradient { grad_norm: gnorm });
    }
    let h = fd_hessian(f, &point.x_star)?;
    let hnorm = h.norm();
    let asymmetry = if hnorm > 0.0 { (&h - h.transpose()).norm() / hnorm } else { 0.0 };
    let sym = (&h + h.transpose()) * 0.5;
    let nhat = &grad / gnorm;
    let p = DMatrix::identity(n, n) - &nhat * nhat.transpose();
    let shape = (&p * sym * &p) / gnorm;
    let eig = SymmetricEigen::new(shape);
    let max_abs = eig.eigenvalues.amax();
    let small = NORMAL_EIG_RTOL * max_abs + NORMAL_EIG_ATOL;
    // Among near-zero eigenvalues, the normal is the best-aligned eigenvector.
    let normal = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() < small)
        .map(|i| (i, eig.eigenvectors.column(i).dot(&nhat).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let (drop, cosine) = normal.ok_or_else(|| {
        Error::DegenerateProjection(format!(
            "no eigenvalue below {small:e} (max |lambda| = {max_abs:e})"
        ))
    })?;
    let mut kappas: Vec<f64> = (0..n).filter(|&i| i != drop).map(|i| eig.eigenvalues[i]).collect();
    kappas.sort_by(|a, b| b.total_cmp(a));
    Ok(PrincipalCurvatureReport {
        layer: point.layer,
        kappas,
        asymmetry,
        normal_cosine: cosine,
    })
}

/// Mean of the four largest and four smallest principal curvatures at one layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCurvatureSummary {
    pub layer: usize,
    /// `κ₁..κ₄` averaged over points (fewer when `N − 1 < 4`).
    pub top: Vec<f64>,
    /// `κ_{N−4}..κ_{N−1}` averaged over points.
    pub bottom: Vec<f64>,
    pub converged: usize,
    pub attempted: usize,
    /// All per-point reports, in point order.
    pub reports: Vec<Option<PrincipalCurvatureReport>>,
}

impl LayerCurvatureSummary {
    pub fn missing(&self) -> bool {
        self.converged == 0
    }
}

/// Initial points for layer `layer`: random inputs of unit per-neuron
/// length pushed forward to that layer's activations.
fn initial_points(net: &NetworkRealization, layer: usize, n_points: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n0 = net.width(0);
    let mut rng = stream_rng(seed, STREAM_BOUNDARY);
    let x0 = DMatrix::from_fn(n0, n_points, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    });
    let pts = if layer == 0 {
        x0
    } else {
        let phi = &net.nonlinearity;
        let h = net.propagate_from(0, x0)?.swap_remove(layer - 1);
        h.map(|v| phi.value(v))
    };
    Ok(pts.column_iter().map(|c| c.iter().copied().collect()).collect())
}

/// Principal-curvature summaries for layers `D−1` down to `0`.
///
/// Points that fail to converge are skipped; a layer where all fail is
/// reported with `converged = 0`.
pub fn curvature_vs_depth(
    net: &NetworkRealization,
    readout: &LinearReadout,
    n_points: usize,
    max_iters: usize,
    seed: u64,
) -> Result<Vec<LayerCurvatureSummary>> {
    if n_points == 0 {
        return Err(invalid("n_points", "must be >= 1"));
    }
    let mut out = Vec::with_capacity(net.depth());
    for layer in (0..net.depth()).rev() {
        let f = SuffixReadout::new(net, layer, readout)?;
        let inits = initial_points(net, layer, n_points, seed)?;
        let reports: Vec<Option<PrincipalCurvatureReport>> = inits
            .iter()
            .map(|x| {
                find_boundary_point(&f, layer, x, max_iters)
                    .and_then(|p| principal_curvatures(&f, &p))
                    .ok()
            })
            .collect();
        let ok: Vec<&PrincipalCurvatureReport> = reports.iter().flatten().collect();
        let m = net.width(layer) - 1;
        let k = m.min(4);
        let avg = |idx: &dyn Fn(usize) -> usize| -> Vec<f64> {
            if ok.is_empty() {
                return vec![f64::NAN; k];
            }
            (0..k)
                .map(|r| ok.iter().map(|rep| rep.kappas[idx(r)]).sum::<f64>() / ok.len() as f64)
                .collect()
        };
        let top = avg(&|r| r);
        let bottom = avg(&|r| m - k + r);
        out.push(LayerCurvatureSummary {
            layer,
            top,
            bottom,
            converged: ok.len(),
            attempted: n_points,
            reports,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Nonlinearity;
    use crate::simulator::sample_network;

    /// Cyclic Jacobi eigenvalue iteration, independent of nalgebra's solver.
    fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut e: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        e.sort_by(|x, y| x.total_cmp(y));
        e
    }

    #[test]
    fn eigenvalues_match_jacobi_oracle() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..5 {
            let m = crate::simulator::gaussian_matrix(&mut rng, 20, 20, 1.0);
            let s = (&m + m.transpose()) * 0.5;
            let mut ours: Vec<f64> = SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().collect();
            ours.sort_by(|x, y| x.total_cmp(y));
            let oracle = jacobi_eigenvalues(s);
            for (a, b) in ours.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn readout_rejects_zero_beta() {
        assert!(LinearReadout::new(DVector::zeros(3), 0.0).is_err());
    }

    #[test]
    fn linear_suffix_gradient_is_transpose_product() {
        let net = sample_network(&[6, 5, 4], 1.3, 0.2, &Nonlinearity::linear(), 2).unwrap();
        let r = LinearReadout::random(4, 2).unwrap();
        let x = [0.3, -0.1, 0.7, 0.2, -0.5];
        let (_, g) = readout_value_and_gradient(&net, 1, &r, &x).unwrap();
        let want = net.weights[1].transpose() * &r.beta;
        assert!((g - want).amax() < 1e-15);
    }

    #[test]
    fn tanh_gradient_matches_finite_differences() {
        let net = sample_network(&[30, 30, 30, 30], 3.0, 0.3, &Nonlinearity::tanh(), 4).unwrap();
        let r = LinearReadout::random(30, 4).unwrap();
        let mut rng = stream_rng(9, 9);
        let x: Vec<f64> = crate::simulator::gaussian_vector(&mut rng, 30, 0.5).iter().copied().collect();
        let (_, g) = readout_value_and_gradient(&net, 0, &r, &x).unwrap();
        let step = 1e-5;
        for _ in 0..20 {
            let d = crate::simulator::gaussian_vector(&mut rng, 30, 1.0).normalize();
            let shift = |s: f64| -> f64 {
                let xs: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + s * b).collect();
                readout_value_and_gradient(&net, 0, &r, &xs).unwrap().0
            };
            let fd = (shift(step) - shift(-step)) / (2.0 * step);
            let exact = g.dot(&d);
            assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(g.norm()), "{fd} vs {exact}");
        }
    }

    #[test]
    fn identity_suffix_projects_onto_hyperplane() {
        let net = sample_network(&[3, 3], 1.0, 0.0, &Nonlinearity::tanh(), 0).unwrap();
        let r = LinearReadout::new(DVector::from_vec(vec![1.0, 2.0, -2.0]), 0.5).unwrap();
        let f = SuffixReadout::new(&net, 1, &r).unwrap();
        let x0 = [1.0, 1.0, 1.0];
        let p = find_boundary_point(&f, 1, &x0, 10).unwrap();
        // Orthogonal projection: x0 - (β·x0 - β0) β / ‖β‖².
        let shift = (1.0 + 2.0 - 2.0 - 0.5) / 9.0;
        let want = [1.0 - shift, 1.0 - 2.0 * shift, 1.0 + 2.0 * shift];
        for (a, b) in p.x_star.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(p.residual < 1e-14);
    }

    #[test]
    fn sphere_oracle() {
        for r in [0.5, 2.0] {
            let f = SphereSurrogate { dim: 8, radius: r };
            let p = find_boundary_point(&f, 0, &[0.3, -0.2, 0.9, 0.1, 0.4, -0.7, 0.2, 0.05], 200).unwrap();
            let norm = p.x_star.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - r).abs() < 1e-6);
            let rep = principal_curvatures(&f, &p).unwrap();
            assert_eq!(rep.kappas.len(), 7);
            assert!(rep.kappas.iter().all(|k| (k - 1.0 / r).abs() < 1e-4), "{:?}", rep.kappas);
            assert!(rep.normal_cosine > 0.99);
        }
    }

    #[test]
    fn linear_suffix_has_flat_boundary() {
        let net = sample_network(&[10, 10, 10, 10], 1.5, 0.3, &Nonlinearity::linear(), 1).unwrap();
        let r = LinearReadout::random(10, 1).unwrap();
        let f = SuffixReadout::new(&net, 0, &r).unwrap();
        let p = find_boundary_point(&f, 0, &[0.5; 10], 100).unwrap();
        let rep = principal_curvatures(&f, &p).unwrap();
        assert!(rep.kappas.iter().all(|k| k.abs() < 1e-8));
    }

    #[test]
    fn curvatures_are_scale_invariant() {
        let net = sample_network(&[20, 20, 20, 20], 3.0, 0.3, &Nonlinearity::tanh(), 5).unwrap();
        let r = LinearReadout::random(20, 5).unwrap();
        let r3 = r.scaled(3.0).unwrap();
        let f1 = SuffixReadout::new(&net, 1, &r).unwrap();
        let f3 = SuffixReadout::new(&net, 1, &r3).unwrap();
        let x = initial_points(&net, 1, 1, 5).unwrap().remove(0);
        let p = find_boundary_point(&f1, 1, &x, 10_000).unwrap();
        let a = principal_curvatures(&f1, &p).unwrap();
        let b = principal_curvatures(&f3, &p).unwrap();
        for (x, y) in a.kappas.iter().zip(&b.kappas) {
            assert!((x - y).abs() < 1e-8 * a.kappas[0].abs().max(1.0));
        }
        assert!(a.asymmetry < 1e-4);
        assert!(a.normal_cosine > 0.99);
    }

    #[test]
    fn depth_one_linear_summary_is_zero() {
        let net = sample_network(&[12, 12], 1.0, 0.2, &Nonlinearity::linear(), 3).unwrap();
        let r = LinearReadout::random(12, 3).unwrap();
        let s = curvature_vs_depth(&net, &r, 3, 100, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].layer, 0);
        assert_eq!(s[0].converged, 3);
        assert!(s[0].top.iter().chain(&s[0].bottom).all(|k| k.abs() < 1e-8));
    }

    #[test]
    fn zero_weight_net_has_zero_curvature() {
        let net = sample_network(&[5, 5, 5], 0.0, 0.5, &Nonlinearity::tanh(), 2).unwrap();
        let r = LinearReadout::random(5, 2).unwrap();
        // G is constant in x for layer 0 and affine for layer 1.
        let f = SuffixReadout::new(&net, 1, &r).unwrap();
        let (_, g) = f.value_and_gradient(&[0.1; 5]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
