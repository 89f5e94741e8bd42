//! The acceptance suite: ten theory-versus-simulation checks at fixed
//! sizes and seeds, each reported as one pass/fail line.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use crate::activations::Nonlinearity;
use crate::boundary::{
    curvature_vs_depth, find_boundary_point, principal_curvatures, LinearReadout, SphereSurrogate, SuffixReadout,
};
use crate::error::{Error, Result};
use crate::expressivity::{
    circle_input_activations, fourier_error_profile, growth_exponent, shallow_length_bound, verify_shallow_bound,
    weight_chaos_empirical, weight_chaos_theory, FourierProbe, ShallowBoundSpec,
};
use crate::geometry::curve_geometry;
use crate::grid::{linspace, theta_grid};
use crate::meanfield::{
    curvature_trajectory, length_fixed_point, length_trajectory, phase_boundary, phase_grid, CMap, EnsembleParams,
};
use crate::quadrature::Quadrature;
use crate::simulator::{
    empirical_correlation, empirical_length, forward_jet, input_with_length, sample_network, stream_rng,
    CircleManifold, JetOrder, NetworkRealization, STREAM_AUX,
};

pub const CRITERION_COUNT: usize = 10;
const SEEDS: u64 = 5;

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.2} s, budget {} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Name and runtime budget of each criterion, indexed by `id - 1`.
pub const CRITERIA: [(&str, u64); CRITERION_COUNT] = [
    ("quadrature oracle", 1),
    ("analytic fixed points", 1),
    ("length-map agreement", 30),
    ("C-map agreement and phase partition", 120),
    ("curvature evolution", 120),
    ("shallow length bound", 60),
    ("boundary curvature", 300),
    ("expressivity profile", 180),
    ("weight chaos", 120),
    ("jet correctness", 30),
];

/// Collects individual checks and remembers the first failure.
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }
}

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize) -> Result<CriterionOutcome> {
    let (name, budget) = *CRITERIA
        .get(id.wrapping_sub(1))
        .ok_or_else(|| crate::error::invalid("criterion", format!("must lie in 1..={CRITERION_COUNT}, got {id}")))?;
    let start = Instant::now();
    let mut c = Checks::new();
    let run = match id {
        1 => quadrature_oracle(&mut c),
        2 => analytic_fixed_points(&mut c),
        3 => length_agreement(&mut c),
        4 => correlation_agreement(&mut c),
        5 => curvature_evolution(&mut c),
        6 => shallow_bound(&mut c),
        7 => boundary_curvature(&mut c),
        8 => expressivity_profile(&mut c),
        9 => weight_chaos(&mut c),
        _ => jet_correctness(&mut c),
    };
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget);
    if let Err(e) = run {
        c.failures.push(format!("error: {e}"));
    }
    c.check(elapsed < budget, || "over the runtime budget".into());
    let passed = c.failures.is_empty();
    let detail = if passed {
        c.notes.join("; ")
    } else {
        let shown: Vec<&str> = c.failures.iter().take(3).map(String::as_str).collect();
        let more = c.failures.len().saturating_sub(3);
        let mut s = shown.join("; ");
        if more > 0 {
            s.push_str(&format!("; and {more} more"));
        }
        s
    };
    Ok(CriterionOutcome {
        id,
        name,
        passed,
        detail,
        elapsed,
        budget,
    })
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    (1..=CRITERION_COUNT)
        .map(|id| run_criterion(id).expect("id in range"))
        .collect()
}

fn tanh_params(sigma_w: f64, sigma_b: f64) -> Result<EnsembleParams> {
    EnsembleParams::tanh(sigma_w, sigma_b)
}

fn quadrature_oracle(c: &mut Checks) -> Result<()> {
    let quad = Quadrature::default();
    let n = 1_000_000usize;
    let (lo, hi) = (-12.0f64, 12.0f64);
    let step = (hi - lo) / (n - 1) as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut worst = 0.0f64;
    for q in [0.01f64, 0.1, 1.0, 10.0, 100.0] {
        let s = q.sqrt();
        let oracle: crate::stats::CompensatedSum = (0..n)
            .map(|i| {
                let z = lo + step * i as f64;
                let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                let t = (s * z).tanh();
                w * t * t * (-0.5 * z * z).exp() * norm * step
            })
            .collect();
        let got = quad.expect_scaled(|u| u.tanh().powi(2), q)?;
        let err = (got - oracle.value()).abs();
        worst = worst.max(err);
        c.check(err < 1e-10, || format!("q = {q}: |error| = {err:.3e}"));
    }
    c.note(format!("max |error| {worst:.2e} over 5 lengths"));
    Ok(())
}

fn analytic_fixed_points(c: &mut Checks) -> Result<()> {
    let quad = Quadrature::default();
    for sw in [0.5, 0.9] {
        let q = length_fixed_point(&tanh_params(sw, 0.0)?, &quad)?;
        c.check(q == 0.0, || format!("sigma_w = {sw}: q* = {q:e}, expected 0"));
    }
    for sw in [1.5, 3.0] {
        let q = length_fixed_point(&tanh_params(sw, 0.0)?, &quad)?;
        c.check(q > 0.0, || format!("sigma_w = {sw}: q* = {q:e}, expected > 0"));
    }
    let b = phase_boundary(0.0, &Nonlinearity::tanh(), &quad)?;
    c.check((b - 1.0).abs() < 1e-6, || format!("phase boundary at sigma_b = 0 is {b}"));
    c.note(format!("phase boundary at sigma_b = 0: {b:.9}"));
    Ok(())
}

const AGREEMENT_WIDTH: usize = 1000;
const AGREEMENT_SIGMA_W: [f64; 3] = [0.5, 2.5, 4.0];
const AGREEMENT_SIGMA_B: f64 = 0.3;
/// Independent inputs (or input pairs) averaged within each network.
const INPUTS_PER_NETWORK: usize = 8;

fn length_agreement(c: &mut Checks) -> Result<()> {
    let quad = Quadrature::default();
    let depth = 10;
    let widths = vec![AGREEMENT_WIDTH; depth + 1];
    let mut worst = 0.0f64;
    for sw in AGREEMENT_SIGMA_W {
        let p = tanh_params(sw, AGREEMENT_SIGMA_B)?;
        let q_star = length_fixed_point(&p, &quad)?;
        let q0s = [0.1, q_star, 5.0];
        let mut sums = vec![[0.0f64; 3]; depth];
        for seed in 0..SEEDS {
            let net = NetworkRealization::sample(&widths, &p, seed)?;
            let mut x0 = DMatrix::zeros(AGREEMENT_WIDTH, 3 * INPUTS_PER_NETWORK);
            for (j, &q0) in q0s.iter().enumerate() {
                for k in 0..INPUTS_PER_NETWORK {
                    let tag = (seed * 3 + j as u64) * INPUTS_PER_NETWORK as u64 + k as u64;
                    let x = input_with_length(AGREEMENT_WIDTH, q0, tag)?;
                    x0.set_column(j * INPUTS_PER_NETWORK + k, &nalgebra::DVector::from_vec(x));
                }
            }
            for rec in net.forward_batch(&x0)? {
                for (col, h) in rec.h.column_iter().enumerate() {
                    sums[rec.layer - 1][col / INPUTS_PER_NETWORK] +=
                        empirical_length(h.as_slice())? / INPUTS_PER_NETWORK as f64;
                }
            }
        }
        let mut hits = Vec::new();
        for (j, &q0) in q0s.iter().enumerate() {
            let theory = length_trajectory(q0, depth, &p, &quad)?;
            for l in 0..depth {
                let emp = sums[l][j] / SEEDS as f64;
                let rel = (emp - theory.values[l]).abs() / theory.values[l];
                worst = worst.max(rel);
                c.check(rel <= 0.05, || {
                    format!("sigma_w = {sw}, q0 = {q0:.4}, layer {}: relative error {rel:.3}", l + 1)
                });
            }
            let it = theory.iterations_to_1pct;
            c.check(it.is_some_and(|k| k <= 10), || {
                format!("sigma_w = {sw}, q0 = {q0:.4}: iterations to 1% = {it:?}")
            });
            hits.push(it.unwrap_or(usize::MAX));
        }
        c.note(format!("sigma_w {sw}: layers to 1% {hits:?}"));
    }
    c.note(format!("max relative error {worst:.4}"));
    Ok(())
}

fn correlation_agreement(c: &mut Checks) -> Result<()> {
    let quad = Quadrature::default();
    let depth = 20;
    let widths = vec![AGREEMENT_WIDTH; depth + 1];
    let mut worst = 0.0f64;
    for sw in AGREEMENT_SIGMA_W {
        let p = tanh_params(sw, AGREEMENT_SIGMA_B)?;
        let cm = CMap::new(&p, &quad)?;
        let q_star = cm.q_star();
        // Inputs sized so that h¹ sits at q*.
        let q0 = (q_star - p.sb2()) / p.sw2();
        let c0s = [0.3, 0.9];
        let mut sums = vec![[0.0f64; 2]; depth];
        for seed in 0..SEEDS {
            let net = NetworkRealization::sample(&widths, &p, seed)?;
            let mut x0 = DMatrix::zeros(AGREEMENT_WIDTH, 3 * INPUTS_PER_NETWORK);
            for k in 0..INPUTS_PER_NETWORK {
                let tag = seed * INPUTS_PER_NETWORK as u64 + k as u64;
                let basis = CircleManifold::sample(AGREEMENT_WIDTH, q0, vec![0.0], tag)?;
                let r = basis.radius();
                for i in 0..AGREEMENT_WIDTH {
                    x0[(i, 3 * k)] = r * basis.u0[i];
                    for (j, &c0) in c0s.iter().enumerate() {
                        x0[(i, 3 * k + j + 1)] = r * (c0 * basis.u0[i] + (1.0 - c0 * c0).sqrt() * basis.u1[i]);
                    }
                }
            }
            for rec in net.forward_batch(&x0)? {
                for k in 0..INPUTS_PER_NETWORK {
                    let base = rec.h.column(3 * k);
                    for j in 0..2 {
                        let e = empirical_correlation(base.as_slice(), rec.h.column(3 * k + j + 1).as_slice())?;
                        sums[rec.layer - 1][j] += e.c12 / INPUTS_PER_NETWORK as f64;
                    }
                }
            }
        }
        for (j, &c0) in c0s.iter().enumerate() {
            let mut theory = (p.sw2() * q0 * c0 + p.sb2()) / q_star;
            for l in 0..depth {
                if l > 0 {
                    theory = cm.apply(theory)?.clamp(-1.0, 1.0);
                }
                let emp = sums[l][j] / SEEDS as f64;
                let err = (emp - theory).abs();
                worst = worst.max(err);
                c.check(err <= 0.05, || {
                    format!("sigma_w = {sw}, c0 = {c0}, layer {}: |error| {err:.3}", l + 1)
                });
            }
        }
    }
    c.note(format!("max |c error| {worst:.4}"));

    let grid = phase_grid(&linspace(0.5, 4.0, 20), &linspace(0.05, 1.0, 20), &Nonlinearity::tanh(), &quad)?;
    let mut ordered = 0;
    for cell in &grid.cells {
        let (chi1, c_star) = match (cell.chi1, cell.c_star) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                c.check(false, || {
                    format!("phase cell ({}, {}) failed: {:?}", cell.sigma_w, cell.sigma_b, cell.error)
                });
                continue;
            }
        };
        if chi1 < 1.0 {
            ordered += 1;
            c.check((c_star - 1.0).abs() <= 1e-6, || {
                format!("ordered cell ({:.3}, {:.3}): c* = {c_star}", cell.sigma_w, cell.sigma_b)
            });
        } else {
            c.check(c_star < 1.0 - 1e-3, || {
                format!("chaotic cell ({:.3}, {:.3}): c* = {c_star}, chi1 = {chi1}", cell.sigma_w, cell.sigma_b)
            });
        }
    }
    c.note(format!("phase grid: {ordered} ordered / {} chaotic cells", grid.cells.len() - ordered));
    Ok(())
}

fn curvature_evolution(c: &mut Checks) -> Result<()> {
    let quad = Quadrature::default();
    let p = tanh_params(4.0, 0.3)?;
    let depth = 10;
    let n = AGREEMENT_WIDTH;
    let n_seeds = 3u64;
    let theory = curvature_trajectory(30, &p, &quad)?;
    let chi1 = theory.chi.chi1;
    let q_star = theory.chi.q_star;
    let thetas = theta_grid(256);
    let mut g_mean = vec![0.0; depth];
    let mut k_mean = vec![0.0; depth];
    let mut lg = vec![0.0; depth];
    for seed in 0..n_seeds {
        let net = sample_network(&vec![n; depth + 1], p.sigma_w, p.sigma_b, &p.nonlinearity, seed)?;
        let circle = CircleManifold::sample(n, q_star, thetas.clone(), seed)?;
        for rec in forward_jet(&net, &circle.jet()?, JetOrder::Acceleration)? {
            let geo = curve_geometry(&rec.to_jet(&thetas)?)?;
            let l = rec.layer - 1;
            g_mean[l] += geo.g_e_norm.iter().sum::<f64>() / thetas.len() as f64;
            k_mean[l] += geo.kappa_norm.iter().map(|k| k * k).sum::<f64>() / thetas.len() as f64;
            lg[l] += geo.lg;
        }
    }
    let s = n_seeds as f64;
    for v in [&mut g_mean, &mut k_mean, &mut lg] {
        v.iter_mut().for_each(|x| *x /= s);
    }
    let mut worst_g = 0.0f64;
    let mut worst_k = 0.0f64;
    for l in 1..depth {
        let ratio = g_mean[l] / g_mean[l - 1];
        let rel = (ratio / chi1 - 1.0).abs();
        worst_g = worst_g.max(rel);
        c.check(rel <= 0.10, || format!("layer {}: metric ratio {ratio:.3} vs chi1 {chi1:.3}", l + 1));
    }
    for l in 0..depth {
        let rel = (k_mean[l] / theory.kappa_sq[l] - 1.0).abs();
        worst_k = worst_k.max(rel);
        c.check(rel <= 0.15, || {
            format!("layer {}: curvature {:.4} vs theory {:.4}", l + 1, k_mean[l], theory.kappa_sq[l])
        });
    }
    let kstar = theory
        .kappa_star_sq
        .ok_or_else(|| Error::Numerical("chaotic ensemble without a curvature fixed point".into()))?;
    let last = theory.kappa_sq[29];
    c.check((last - kstar).abs() <= 1e-6, || format!("theory at layer 30 is {last}, fixed point {kstar}"));
    let mut worst_lg = 0.0f64;
    for l in 3..=8 {
        let emp = (lg[l - 1] / lg[l - 2]).ln();
        let th = 0.5 * (chi1 * theory.kappa_sq[l - 1] / theory.kappa_sq[l - 2]).ln();
        let rel = (emp / th - 1.0).abs();
        worst_lg = worst_lg.max(rel);
        c.check(emp > 0.0 && rel <= 0.25, || {
            format!("layer {l}: Gauss-length increment {emp:.4} vs theory {th:.4}")
        });
    }
    c.note(format!(
        "max rel error: metric ratio {worst_g:.3}, curvature {worst_k:.3}, Gauss increment {worst_lg:.3}"
    ));
    Ok(())
}

fn shallow_bound(c: &mut Checks) -> Result<()> {
    let phi = Nonlinearity::tanh();
    let bound = shallow_length_bound(&ShallowBoundSpec::new(1000, 1, 2.0)?);
    let mut notes = Vec::new();
    for sw in [1.0, 4.0, 8.0] {
        let r = verify_shallow_bound(100, 1000, sw, 0.3, &phi, 1.0, 512, 11)?;
        c.check(r.violations == 0 && r.bound == bound, || {
            format!("sigma_w = {sw}: {} violations of {}", r.violations, r.bound)
        });
        let widths = [100.0, 400.0, 1600.0];
        let mut maxima = Vec::new();
        for &w in &widths {
            let r = verify_shallow_bound(100, w as usize, sw, 0.3, &phi, 1.0, 512, 12)?;
            c.check(r.violations == 0, || format!("sigma_w = {sw}, N = {w}: bound violated"));
            maxima.push(r.max_length);
        }
        let e = growth_exponent(&widths, &maxima)?;
        c.check(e <= 0.6, || format!("sigma_w = {sw}: growth exponent {e:.3}"));
        notes.push(format!("sigma_w {sw}: max L {:.1} of {bound}, exponent {e:.3}", r.max_length));
    }
    c.note(notes.join(", "));
    Ok(())
}

fn boundary_curvature(c: &mut Checks) -> Result<()> {
    let dim = 12;
    let mut rng = stream_rng(7, STREAM_AUX + 3);
    for r in [0.5, 2.0] {
        let f = SphereSurrogate { dim, radius: r };
        for _ in 0..3 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let pt = find_boundary_point(&f, 0, &x, 200)?;
            let rep = principal_curvatures(&f, &pt)?;
            let err = rep.kappas.iter().map(|k| (k - 1.0 / r).abs()).fold(0.0, f64::max);
            c.check(err <= 1e-4, || format!("sphere r = {r}: max |kappa - 1/r| = {err:.2e}"));
        }
    }

    let lin = sample_network(&[20, 20, 20, 20], 1.3, 0.2, &Nonlinearity::linear(), 5)?;
    let readout = LinearReadout::random(20, 5)?;
    let mut worst_lin = 0.0f64;
    for layer in 0..3 {
        let f = SuffixReadout::new(&lin, layer, &readout)?;
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pt = find_boundary_point(&f, layer, &x, 100)?;
        let rep = principal_curvatures(&f, &pt)?;
        let m = rep.kappas.iter().map(|k| k.abs()).fold(0.0, f64::max);
        worst_lin = worst_lin.max(m);
        c.check(m <= 1e-8, || format!("linear suffix at layer {layer}: max |kappa| = {m:.2e}"));
    }

    let net = sample_network(&[100; 7], 4.0, 0.3, &Nonlinearity::tanh(), 0)?;
    let readout = LinearReadout::random(100, 0)?;
    let summary = curvature_vs_depth(&net, &readout, 10, 500, 0)?;
    let kappa1 = |layer: usize| -> Option<f64> {
        summary
            .iter()
            .find(|s| s.layer == layer && !s.missing())
            .map(|s| s.top[0])
    };
    let near: Vec<Option<f64>> = (0..3).map(kappa1).collect();
    match (near[0], near[1], near[2]) {
        (Some(k0), Some(k1), Some(k2)) => {
            c.check(k0 > k1 && k1 > k2, || {
                format!("mean kappa_1 at layers 0, 1, 2 = {k0:.3}, {k1:.3}, {k2:.3} is not increasing toward the input")
            });
            c.note(format!(
                "sphere and linear oracles ok (max |kappa| {worst_lin:.1e}); mean kappa_1 at layers 2, 1, 0: {k2:.3}, {k1:.3}, {k0:.3}"
            ));
        }
        _ => c.check(false, || "no converged boundary points near the input".into()),
    }
    Ok(())
}

fn expressivity_profile(c: &mut Checks) -> Result<()> {
    // σ_w = 2.5 keeps depth 8 from spreading its spectrum past ω_max.
    let p = tanh_params(2.5, 0.3)?;
    let quad = Quadrature::default();
    let q_star = length_fixed_point(&p, &quad)?;
    let q0 = (q_star - p.sb2()) / p.sw2();
    let probe = FourierProbe::new(50, 256, None)?;
    let band = |depth: usize, width: usize| -> Result<f64> {
        let mut total = 0.0;
        for seed in 0..SEEDS {
            let mut widths = vec![width; depth + 1];
            widths[0] = 200;
            let net = NetworkRealization::sample(&widths, &p, seed)?;
            let act = circle_input_activations(&net, q0, &probe.thetas, seed)?;
            let errs = fourier_error_profile(&act, &probe)?;
            total += errs[40..=50].iter().map(|e| e.error).sum::<f64>() / 11.0;
        }
        Ok(total / SEEDS as f64)
    };
    let e1 = band(1, 200)?;
    let e4 = band(4, 200)?;
    let e8 = band(8, 200)?;
    let wide = band(1, 2000)?;
    c.check(e1 > e4 && e4 > e8, || {
        format!("band error by depth 1, 4, 8 = {e1:.4}, {e4:.4}, {e8:.4} is not decreasing")
    });
    c.check(wide >= e8, || format!("depth 1 at width 2000 ({wide:.4}) beats depth 8 ({e8:.4})"));
    c.note(format!(
        "band error depth 1/4/8 = {e1:.4}/{e4:.4}/{e8:.4}; depth 1 width 2000 = {wide:.4}"
    ));
    Ok(())
}

fn weight_chaos(c: &mut Checks) -> Result<()> {
    let quad = Quadrature::default();
    let p = tanh_params(4.0, 0.3)?;
    let deltas: Vec<f64> = (0..=10).map(|i| 0.05 * i as f64).collect();
    let mut emp = vec![0.0; deltas.len()];
    let mut theory = Vec::new();
    for seed in 0..SEEDS {
        let fam = weight_chaos_empirical(&p, &[AGREEMENT_WIDTH; 10], &deltas, 64, seed, &quad)?;
        for (e, v) in emp.iter_mut().zip(&fam.empirical) {
            *e += v / SEEDS as f64;
        }
        theory = fam.theory;
    }
    let mut worst = 0.0f64;
    for ((d, e), t) in deltas.iter().zip(&emp).zip(&theory) {
        let err = (e - t).abs();
        worst = worst.max(err);
        c.check(err <= 0.05, || format!("delta = {d:.2}: empirical {e:.4} vs theory {t:.4}"));
    }
    let by_depth: Vec<f64> = [3, 6, 9, 12]
        .iter()
        .map(|&d| Ok(*weight_chaos_theory(&p, 0.1, d, &quad)?.last().expect("depth >= 1")))
        .collect::<Result<_>>()?;
    c.check(by_depth.windows(2).all(|w| w[1] < w[0]), || {
        format!("theory C(0.1) at depths 3, 6, 9, 12 = {by_depth:?} is not decreasing")
    });
    c.note(format!(
        "max |C error| {worst:.4}; theory C(0.1) at depths 3/6/9/12 = {:.4}/{:.4}/{:.4}/{:.4}",
        by_depth[0], by_depth[1], by_depth[2], by_depth[3]
    ));
    Ok(())
}

fn jet_correctness(c: &mut Checks) -> Result<()> {
    let p = tanh_params(2.5, 0.3)?;
    let n = 200;
    let depth = 10;
    let net = NetworkRealization::sample(&vec![n; depth + 1], &p, 21)?;
    let q_star = length_fixed_point(&p, &Quadrature::default())?;
    let mut rng = stream_rng(21, STREAM_AUX + 4);
    let mut thetas: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    thetas.sort_by(f64::total_cmp);
    let circle = CircleManifold::sample(n, q_star, thetas.clone(), 21)?;
    let recs = forward_jet(&net, &circle.jet()?, JetOrder::Acceleration)?;
    let delta = 1e-5;
    let plus = propagate_at(&net, &circle, &thetas, delta)?;
    let minus = propagate_at(&net, &circle, &thetas, -delta)?;
    let mut worst = 0.0f64;
    for layer in [1usize, 5, 10] {
        let rec = &recs[layer - 1];
        let v = rec.v.as_ref().expect("velocity");
        let a = rec.a.as_ref().expect("acceleration");
        let (hp, vp) = &plus[layer - 1];
        let (hm, vm) = &minus[layer - 1];
        for j in 0..thetas.len() {
            let fd_v = (hp.column(j) - hm.column(j)) / (2.0 * delta);
            let fd_a = (vp.column(j) - vm.column(j)) / (2.0 * delta);
            let ev = (fd_v - v.column(j)).norm() / v.column(j).norm();
            let ea = (fd_a - a.column(j)).norm() / a.column(j).norm();
            worst = worst.max(ev).max(ea);
            c.check(ev <= 1e-4 && ea <= 1e-4, || {
                format!("layer {layer}, theta {:.4}: relative errors v {ev:.2e}, a {ea:.2e}", thetas[j])
            });
        }
    }
    c.note(format!("max relative error {worst:.2e} at 50 angles"));
    Ok(())
}

/// `(h^l, v^l)` for `l = 1..=D` at the angles `thetas + shift`, propagated
/// directly so the shifted angles need not lie in `[0, 2π)`.
fn propagate_at(
    net: &NetworkRealization,
    circle: &CircleManifold,
    thetas: &[f64],
    shift: f64,
) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let r = circle.radius();
    let t = thetas.len();
    let h1 = DMatrix::from_fn(circle.width, t, |i, j| {
        let (s, co) = (thetas[j] + shift).sin_cos();
        r * (circle.u0[i] * co + circle.u1[i] * s)
    });
    let v1 = DMatrix::from_fn(circle.width, t, |i, j| {
        let (s, co) = (thetas[j] + shift).sin_cos();
        r * (-circle.u0[i] * s + circle.u1[i] * co)
    });
    let phi = &net.nonlinearity;
    let mut out = vec![(h1, v1)];
    for l in 2..=net.depth() {
        let (h, v) = out.last().expect("layer 1 present");
        let d1 = h.map(|x| phi.deriv1(x));
        let vn = &net.weights[l - 1] * d1.component_mul(v);
        let hn = net.layer_apply(l, h)?;
        out.push((hn, vn));
    }
    Ok(out)
}
