//! Expectations under the standard Gaussian measure `Dz`.
//!
//! [`QuadratureRule`] holds nodes and weights for `E[f(z)]`, `z ~ N(0, 1)`.
//! Gauss-Hermite rules come from the orthonormal Hermite recurrence with
//! Newton polishing, rescaled from the `exp(-x^2)` weight to the unit-variance
//! Gaussian. Mean-field integrals of the form `E[g(√q z)]` use a
//! [`Quadrature`] policy, which by default picks a trapezoid step on the
//! Gaussian density that resolves unit-scale features of `g` at any `q`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Gauss-Hermite order used by [`QuadratureRule::default`].
pub const DEFAULT_ORDER: usize = 101;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_STALL_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 100;

/// Nodes and weights of a rule for `E[f(z)]`, `z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss-Hermite rule with `order` nodes.
    pub fn new(order: usize) -> Result<Self> {
        Self::gauss_hermite(order)
    }

    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(invalid("order", format!("must be >= 2, got {order}")));
        }
        let n = order;
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        // Orthonormal Hermite recurrence at z: returns (p_n, p_n').
        let eval = |z: f64| {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            (p1, (2.0 * nf).sqrt() * p2)
        };
        // The recurrence must stay finite out to the largest root.
        let (p_edge, d_edge) = eval((2.0 * nf + 1.0).sqrt());
        if !p_edge.is_finite() || !d_edge.is_finite() {
            return Err(Error::QuadratureNoConvergence { order });
        }
        // Golub-Welsch eigenvalues seed Newton on the recurrence.
        let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        guesses.sort_by(|a, b| b.total_cmp(a));
        let half = n.div_ceil(2);
        // Physicists' nodes x_i (weight exp(-x^2)), largest first.
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..half {
            let mut z = guesses[i];
            let mut best_step = f64::INFINITY;
            let mut converged = false;
            let mut pp = 0.0;
            for _ in 0..NEWTON_MAX_ITERS {
                let (p1, d) = eval(z);
                pp = d;
                if !p1.is_finite() || !pp.is_finite() || pp == 0.0 {
                    return Err(Error::QuadratureNoConvergence { order });
                }
                let z1 = z;
                z = z1 - p1 / pp;
                let step = (z - z1).abs() / z.abs().max(1.0);
                best_step = best_step.min(step);
                if step <= NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            // Roundoff in the recurrence can stall Newton just above 1e-14.
            if !converged && best_step > NEWTON_STALL_TOL {
                return Err(Error::QuadratureNoConvergence { order });
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[half - 1] = 0.0;
        }
        let norm = PI.sqrt();
        let nodes: Vec<f64> = x.iter().rev().map(|xi| SQRT_2 * xi).collect();
        let weights: Vec<f64> = w.iter().rev().map(|wi| wi / norm).collect();
        Self::finish(nodes, weights).ok_or(Error::QuadratureNoConvergence { order })
    }

    /// Trapezoid rule on the Gaussian density: nodes `k·step` for
    /// `|k·step| <= half_width`, weights `step·N(z_k)` normalized to sum 1.
    ///
    /// Spectrally accurate for integrands analytic in a strip around the
    /// real axis, with error `~exp(-2π d / step)` for strip half-width `d`.
    pub fn trapezoid(step: f64, half_width: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(invalid("step", format!("must be > 0, got {step}")));
        }
        if !(half_width >= step) || !half_width.is_finite() {
            return Err(invalid("half_width", format!("must be >= step, got {half_width}")));
        }
        let k = (half_width / step).floor() as i64;
        let nodes: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
        let weights: Vec<f64> = nodes.iter().map(|z| (-0.5 * z * z).exp()).collect();
        Self::finish(nodes, weights).ok_or_else(|| invalid("step", "degenerate trapezoid rule"))
    }

    /// Normalizes the mass to one and symmetrizes about zero.
    fn finish(mut nodes: Vec<f64>, mut weights: Vec<f64>) -> Option<Self> {
        let n = nodes.len();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return None;
        }
        for wi in &mut weights {
            *wi /= total;
        }
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let a = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -a;
            nodes[j] = a;
            let b = 0.5 * (weights[i] + weights[j]);
            weights[i] = b;
            weights[j] = b;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        if nodes.windows(2).any(|p| p[0] >= p[1]) {
            return None;
        }
        Some(Self { nodes, weights })
    }

    /// Number of nodes.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_i f(z_i)`.
    pub fn expect1(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(z);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand {
                    z1: z,
                    z2: f64::NAN,
                    value: v,
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Tensor-product rule for `E[f(u1, u2)]` with `u1 = √q1 z1` and
    /// `u2 = √q2 (c z1 + √(1 - c²) z2)`, so that `⟨u1 u2⟩ = c √(q1 q2)`.
    pub fn expect2(&self, f: impl Fn(f64, f64) -> f64, c: f64, q1: f64, q2: f64) -> Result<f64> {
        if !(c.abs() <= 1.0) {
            return Err(invalid("c", format!("correlation must lie in [-1, 1], got {c}")));
        }
        if !(q1 >= 0.0) || !(q2 >= 0.0) {
            return Err(invalid("q", format!("lengths must be nonnegative, got ({q1}, {q2})")));
        }
        let s1 = q1.sqrt();
        let s2 = q2.sqrt();
        let cc = (1.0 - c * c).max(0.0).sqrt();
        let mut acc = 0.0;
        for (&z1, &w1) in self.nodes.iter().zip(&self.weights) {
            let u1 = s1 * z1;
            let mut inner = 0.0;
            for (&z2, &w2) in self.nodes.iter().zip(&self.weights) {
                let u2 = s2 * (c * z1 + cc * z2);
                let v = f(u1, u2);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand { z1, z2, value: v });
                }
                inner += w2 * v;
            }
            acc += w1 * inner;
        }
        Ok(acc)
    }
}

/// Builds the Gauss-Hermite rule with `order` nodes.
pub fn build_rule(order: usize) -> Result<QuadratureRule> {
    QuadratureRule::gauss_hermite(order)
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_hermite(DEFAULT_ORDER).expect("default quadrature order converges")
    }
}

/// Trapezoid step chosen from the length scale of the integrand.
///
/// For `E[g(√q z)]` the z-step is `min(max_step, unit_step / √q)`: features
/// of `g` at unit scale in `u = √q z` always see the same resolution.
/// The step never drops below `min_step`, which bounds the node count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTrapezoid {
    pub unit_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub half_width: f64,
}

impl Default for ResolvedTrapezoid {
    fn default() -> Self {
        Self {
            unit_step: 0.25,
            min_step: 0.01,
            max_step: 0.5,
            half_width: 10.0,
        }
    }
}

impl ResolvedTrapezoid {
    pub fn rule_for(&self, q: f64) -> Result<QuadratureRule> {
        let step = if q > 0.0 {
            (self.unit_step / q.sqrt()).clamp(self.min_step, self.max_step)
        } else {
            self.max_step
        };
        QuadratureRule::trapezoid(step, self.half_width)
    }
}

/// How mean-field integrals `E[g(√q z)]` are discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Quadrature {
    /// One fixed rule for every `q`.
    Fixed(QuadratureRule),
    /// A trapezoid rule whose step shrinks as `1/√q`.
    Resolved(ResolvedTrapezoid),
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Resolved(ResolvedTrapezoid::default())
    }
}

impl Quadrature {
    pub fn hermite(order: usize) -> Result<Self> {
        Ok(Quadrature::Fixed(QuadratureRule::gauss_hermite(order)?))
    }

    /// The rule applied at squared length `q`.
    pub fn rule_for(&self, q: f64) -> Result<std::borrow::Cow<'_, QuadratureRule>> {
        match self {
            Quadrature::Fixed(r) => Ok(std::borrow::Cow::Borrowed(r)),
            Quadrature::Resolved(t) => Ok(std::borrow::Cow::Owned(t.rule_for(q)?)),
        }
    }

    /// `E[g(√q z)]`.
    pub fn expect_scaled(&self, g: impl Fn(f64) -> f64, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(invalid("q", format!("must be >= 0, got {q}")));
        }
        let s = q.sqrt();
        self.rule_for(q)?.expect1(|z| g(s * z))
    }

    /// `E[f(u1, u2)]` with the correlated construction of [`QuadratureRule::expect2`].
    pub fn expect_pair(&self, f: impl Fn(f64, f64) -> f64, c: f64, q1: f64, q2: f64) -> Result<f64> {
        if !(q1 >= 0.0) || !(q2 >= 0.0) {
            return Err(invalid("q", format!("lengths must be nonnegative, got ({q1}, {q2})")));
        }
        self.rule_for(q1.max(q2))?.expect2(f, c, q1, q2)
    }

    pub fn describe(&self) -> String {
        match self {
            Quadrature::Fixed(r) => format!("fixed:{}", r.order()),
            Quadrature::Resolved(t) => format!(
                "resolved:{}:{}:{}:{}",
                t.unit_step, t.min_step, t.max_step, t.half_width
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        (1..k).step_by(2).map(|j| j as f64).product()
    }

    /// Dense trapezoid on [-12, 12] with 10^6 intervals.
    fn trapezoid_oracle(f: impl Fn(f64) -> f64) -> f64 {
        let n = 1_000_000usize;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        let norm = 1.0 / (2.0 * PI).sqrt();
        let g = |z: f64| f(z) * norm * (-0.5 * z * z).exp();
        let mut s = 0.5 * (g(a) + g(b));
        for i in 1..n {
            s += g(a + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn two_point_rule() {
        let r = QuadratureRule::new(2).unwrap();
        assert!((r.nodes()[0] + 1.0).abs() < 1e-14);
        assert!((r.nodes()[1] - 1.0).abs() < 1e-14);
        assert!((r.weights()[0] - 0.5).abs() < 1e-14);
        assert!((r.weights()[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_small_order() {
        assert!(QuadratureRule::new(1).is_err());
        assert!(QuadratureRule::new(0).is_err());
    }

    #[test]
    fn rejects_order_that_overflows() {
        assert!(matches!(
            QuadratureRule::new(5000),
            Err(Error::QuadratureNoConvergence { .. })
        ));
    }

    #[test]
    fn rule_invariants() {
        for order in [2, 3, 7, 20, 64, 101, 200] {
            let r = QuadratureRule::new(order).unwrap();
            assert_eq!(r.order(), order);
            let total: f64 = r.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "order {order}: {total}");
            assert!(r.nodes().windows(2).all(|p| p[0] < p[1]));
            assert!(r.expect1(|z| z).unwrap().abs() < 1e-12);
            assert!((r.expect1(|z| z * z).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn moments_exact_up_to_degree() {
        for order in [4, 10, 30] {
            let r = QuadratureRule::new(order).unwrap();
            for k in 0..(2 * order as u32) {
                let got = r.expect1(|z| z.powi(k as i32)).unwrap();
                let want = double_factorial_moment(k);
                // Roundoff scales with the largest term in the sum.
                let scale: f64 = r
                    .nodes()
                    .iter()
                    .zip(r.weights())
                    .map(|(z, w)| (w * z.powi(k as i32)).abs())
                    .sum();
                let tol = 1e-12 * scale.max(1.0);
                assert!((got - want).abs() < tol, "order {order} k {k}: {got} vs {want}");
            }
        }
        let r = QuadratureRule::new(64).unwrap();
        assert!((r.expect1(|z| z.powi(4)).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn expect1_examples() {
        let r = QuadratureRule::default();
        assert!((r.expect1(|_| 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((r.expect1(|z| z.exp()).unwrap() - 0.5f64.exp()).abs() < 1e-12);
        let oracle = trapezoid_oracle(|z| z.tanh().powi(2));
        let got = r.expect1(|z| z.tanh().powi(2)).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn expect1_reports_nonfinite_node() {
        let r = QuadratureRule::new(5).unwrap();
        let err = r.expect1(|z| if z == 0.0 { f64::NAN } else { z }).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { z1, .. } if z1 == 0.0));
    }

    #[test]
    fn spectral_convergence_tanh_sq() {
        // Poles of tanh at ±iπ/2 limit Gauss-Hermite convergence to
        // roughly exp(-c√n); orders below ~128 are still short of 1e-12.
        let a = QuadratureRule::new(128).unwrap().expect1(|z| z.tanh().powi(2)).unwrap();
        let b = QuadratureRule::new(256).unwrap().expect1(|z| z.tanh().powi(2)).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        let c = QuadratureRule::new(512).unwrap().expect1(|z| z.tanh().powi(2)).unwrap();
        assert!((b - c).abs() < (a - b).abs().max(1e-15), "{b} vs {c}");
    }

    #[test]
    fn trapezoid_rule_basics() {
        let r = QuadratureRule::trapezoid(0.25, 10.0).unwrap();
        assert_eq!(r.order(), 81);
        let total: f64 = r.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((r.expect1(|z| z * z).unwrap() - 1.0).abs() < 1e-14);
        assert!((r.expect1(|z| z.powi(4)).unwrap() - 3.0).abs() < 1e-13);
        let oracle = trapezoid_oracle(|z| z.tanh().powi(2));
        assert!((r.expect1(|z| z.tanh().powi(2)).unwrap() - oracle).abs() < 1e-10);
        assert!(QuadratureRule::trapezoid(0.0, 10.0).is_err());
        assert!(QuadratureRule::trapezoid(1.0, 0.5).is_err());
    }

    #[test]
    fn resolved_policy_tracks_large_lengths() {
        // E[tanh(√q z)²] at q = 12.6: dense oracle against both policies.
        let q: f64 = 12.6;
        let oracle = trapezoid_oracle(|z| (q.sqrt() * z).tanh().powi(2));
        let resolved = Quadrature::default()
            .expect_scaled(|u| u.tanh().powi(2), q)
            .unwrap();
        assert!((resolved - oracle).abs() < 1e-12, "{resolved} vs {oracle}");
        let gh = Quadrature::hermite(101)
            .unwrap()
            .expect_scaled(|u| u.tanh().powi(2), q)
            .unwrap();
        assert!((gh - oracle).abs() > 1e-6);
        assert!(Quadrature::default().expect_scaled(|u| u, -1.0).is_err());
    }

    #[test]
    fn resolved_step_is_clamped() {
        let t = ResolvedTrapezoid::default();
        assert_eq!(t.rule_for(0.0).unwrap().order(), 41);
        assert!(t.rule_for(1e12).unwrap().order() <= 2001);
    }

    #[test]
    fn expect2_examples() {
        let r = QuadratureRule::default();
        assert!(r.expect2(|a, b| a * b, 0.0, 1.0, 1.0).unwrap().abs() < 1e-12);
        assert!((r.expect2(|a, b| a * b, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((r.expect2(|a, b| a * b, 0.3, 2.0, 3.0).unwrap() - 0.3 * 6f64.sqrt()).abs() < 1e-12);
        assert!(r.expect2(|a, b| a * b, 1.5, 1.0, 1.0).is_err());
        assert!(r.expect2(|a, b| a * b, 0.5, -1.0, 1.0).is_err());
        assert!(r.expect2(|_, _| f64::INFINITY, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn expect2_tanh_matches_dense_grid() {
        // 2-D trapezoid over the independent (z1, z2) plane.
        let c: f64 = 0.5;
        let n = 2400usize;
        let (a, b) = (-10.0, 10.0);
        let h = (b - a) / n as f64;
        let g: Vec<f64> = (0..=n)
            .map(|i| {
                let z = a + i as f64 * h;
                let end = if i == 0 || i == n { 0.5 } else { 1.0 };
                end * h * (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
            })
            .collect();
        let cc = (1.0 - c * c).sqrt();
        let mut oracle = 0.0;
        for i in 0..=n {
            let z1 = a + i as f64 * h;
            let t1 = z1.tanh();
            let mut inner = 0.0;
            for j in 0..=n {
                let z2 = a + j as f64 * h;
                inner += g[j] * (c * z1 + cc * z2).tanh();
            }
            oracle += g[i] * t1 * inner;
        }
        let got = QuadratureRule::default()
            .expect2(|u1, u2| u1.tanh() * u2.tanh(), c, 1.0, 1.0)
            .unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn expect2_degenerates_at_unit_correlation() {
        let r = QuadratureRule::default();
        let f = |a: f64, b: f64| a.tanh() * (0.3 * b).sin() + a * b;
        for q in [0.1, 1.0, 7.0] {
            let two = r.expect2(f, 1.0, q, q).unwrap();
            let one = r.expect1(|z| f(q.sqrt() * z, q.sqrt() * z)).unwrap();
            assert!((two - one).abs() < 1e-10);
        }
    }

    #[test]
    fn expect2_symmetric_slots() {
        let r = QuadratureRule::new(41).unwrap();
        let f = |a: f64, b: f64| (a * b).tanh() + a.tanh() * b.tanh();
        let x = r.expect2(f, 0.37, 1.3, 1.3).unwrap();
        let y = r.expect2(|a, b| f(b, a), 0.37, 1.3, 1.3).unwrap();
        assert!((x - y).abs() < 1e-12);
    }
}
