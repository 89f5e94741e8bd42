use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use deepgeom::expressivity::{fourier_error_profile, weight_chaos_theory, FourierProbe};
use deepgeom::geometry::{curve_geometry, CurveJet};
use deepgeom::grid::theta_grid;
use deepgeom::meanfield::{c_map, chi1, curvature_step, length_map, CMap};
use deepgeom::simulator::{gaussian_matrix, stream_rng};
use deepgeom::{EnsembleParams, Nonlinearity, Quadrature, QuadratureRule};

/// `E[z^k]` for a standard normal.
fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        (1..k).step_by(2).map(|j| j as f64).product()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hermite_rules_integrate_polynomials(order in 2usize..40, seed in 0u64..1000) {
        let rule = QuadratureRule::gauss_hermite(order).unwrap();
        let deg = (2 * order - 1).min(20) as u32;
        let mut rng = stream_rng(seed, 0);
        let coef: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = rule
            .expect1(|z| coef.iter().enumerate().map(|(k, c)| c * z.powi(k as i32)).sum())
            .unwrap();
        let want: f64 = coef.iter().enumerate().map(|(k, c)| c * gaussian_moment(k as u32)).sum();
        let scale: f64 = coef.iter().enumerate().map(|(k, c)| (c * gaussian_moment(k as u32)).abs()).sum();
        prop_assert!((got - want).abs() < 1e-10 * scale.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn pair_expectation_degenerates_at_unit_correlation(q in 0.01f64..20.0) {
        let rule = QuadratureRule::gauss_hermite(101).unwrap();
        let f = |a: f64, b: f64| a.tanh() * (0.5 * b).sin() + a * b;
        let two = rule.expect2(f, 1.0, q, q).unwrap();
        let one = rule.expect1(|z| f(q.sqrt() * z, q.sqrt() * z)).unwrap();
        prop_assert!((two - one).abs() < 1e-10);
    }

    #[test]
    fn pair_expectation_is_symmetric(c in -1.0f64..1.0, q1 in 0.05f64..5.0, q2 in 0.05f64..5.0) {
        // Entire integrand, so both slot orders are resolved to roundoff.
        let rule = QuadratureRule::gauss_hermite(101).unwrap();
        let f = |a: f64, b: f64| a.cos() * b.cos() + a * a * b * b;
        let ab = rule.expect2(f, c, q1, q2).unwrap();
        let ba = rule.expect2(f, c, q2, q1).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
    }

    #[test]
    fn tanh_parity(h in -30.0f64..30.0) {
        let t = Nonlinearity::tanh();
        prop_assert_eq!(t.value(-h), -t.value(h));
        prop_assert_eq!(t.deriv1(-h), t.deriv1(h));
        prop_assert_eq!(t.deriv2(-h), -t.deriv2(h));
    }

    #[test]
    fn cmap_fixes_one(sw in 0.3f64..4.0, sb in 0.05f64..1.0) {
        let p = EnsembleParams::tanh(sw, sb).unwrap();
        let quad = Quadrature::default();
        prop_assert!((c_map(1.0, &p, &quad).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn length_map_is_monotone(sw in 0.3f64..4.0, sb in 0.0f64..1.0, a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let p = EnsembleParams::tanh(sw, sb).unwrap();
        let quad = Quadrature::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(length_map(lo, &p, &quad).unwrap() <= length_map(hi, &p, &quad).unwrap() + 1e-14);
    }

    #[test]
    fn chi1_is_the_cmap_slope(sw in 0.5f64..4.0, sb in 0.05f64..1.0) {
        let p = EnsembleParams::tanh(sw, sb).unwrap();
        let quad = Quadrature::default();
        let cm = CMap::new(&p, &quad).unwrap();
        let h = 1e-6;
        // One-sided difference below c = 1, corrected to second order.
        let fd = (3.0 * cm.apply(1.0).unwrap() - 4.0 * cm.apply(1.0 - h).unwrap() + cm.apply(1.0 - 2.0 * h).unwrap()) / (2.0 * h);
        let want = chi1(&p, &quad).unwrap();
        prop_assert!((fd - want).abs() < 1e-5 * want.max(1.0), "{fd} vs {want}");
    }

    #[test]
    fn curvature_recursion_converges(start in 1e-6f64..1e6, c1 in 1.05f64..5.0, c2 in 0.01f64..10.0) {
        let mut k = start;
        for _ in 0..10_000 {
            k = curvature_step(k, c1, c2);
        }
        let fixed = 3.0 * c2 / (c1 * (c1 - 1.0));
        prop_assert!((k - fixed).abs() < 1e-9 * fixed.max(1.0));
    }

    #[test]
    fn weight_chaos_theory_is_even(delta in 0.0f64..1.0, depth in 2usize..8) {
        let p = EnsembleParams::tanh(3.0, 0.2).unwrap();
        let quad = Quadrature::default();
        let a = weight_chaos_theory(&p, delta, depth, &quad).unwrap();
        let b = weight_chaos_theory(&p, -delta, depth, &quad).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fourier_error_is_scale_invariant(scale in 1e-3f64..1e3, seed in 0u64..100) {
        let probe = FourierProbe::new(5, 48, None).unwrap();
        let mut rng = stream_rng(seed, 9);
        let act = gaussian_matrix(&mut rng, 48, 12, 1.0).map(|x: f64| (2.0 * x).tanh());
        let e1 = fourier_error_profile(&act, &probe).unwrap();
        let e2 = fourier_error_profile(&(&act * scale), &probe).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            prop_assert!((a.error - b.error).abs() < 1e-8);
        }
    }
}

use rand::Rng;

#[test]
fn geometry_is_rotation_invariant() {
    let thetas = theta_grid(64);
    let n = 6;
    let arg = |i: usize, j: usize| (i + 1) as f64 * thetas[j] + i as f64;
    let h = DMatrix::from_fn(n, 64, |i, j| arg(i, j).cos() / (i + 1) as f64);
    let v = DMatrix::from_fn(n, 64, |i, j| -arg(i, j).sin());
    let a = DMatrix::from_fn(n, 64, |i, j| -((i + 1) as f64) * arg(i, j).cos());
    let base = curve_geometry(&CurveJet::new(thetas.clone(), h.clone(), v.clone(), a.clone()).unwrap()).unwrap();
    let mut rng = stream_rng(3, 3);
    let q = gaussian_matrix(&mut rng, n, n, 1.0).qr().q();
    let rot = curve_geometry(&CurveJet::new(thetas, &q * h, &q * v, &q * a).unwrap()).unwrap();
    assert_abs_diff_eq!(base.le, rot.le, epsilon = 1e-10);
    assert_abs_diff_eq!(base.lg, rot.lg, epsilon = 1e-10);
    for (x, y) in base.kappa.iter().zip(&rot.kappa) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-10);
    }
}

#[test]
fn piecewise_linear_activations_are_refused_by_curvature_theory() {
    let quad = Quadrature::default();
    for phi in [Nonlinearity::relu(), Nonlinearity::hard_tanh()] {
        assert!(!phi.has_smooth_second_derivative());
        let p = EnsembleParams::new(1.2, 0.3, phi).unwrap();
        assert!(deepgeom::meanfield::curvature_trajectory(5, &p, &quad).is_err());
        assert!(deepgeom::meanfield::chi2(&p, &quad).is_err());
    }
}

#[test]
fn spectral_convergence_in_order() {
    // Doubling the order barely moves a smooth integrand once nodes resolve it.
    let a = QuadratureRule::gauss_hermite(128).unwrap().expect1(|z| z.tanh().powi(2)).unwrap();
    let b = QuadratureRule::gauss_hermite(256).unwrap().expect1(|z| z.tanh().powi(2)).unwrap();
    assert!((a - b).abs() < 1e-10, "{}", (a - b).abs());
}
