//! Riemannian quantities of sampled closed curves.
//!
//! A [`CurveJet`] stores position, velocity and acceleration at each sample
//! as matrix columns (`N × T`, one column per θ).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVectorView};
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Roundoff allowance for the Cauchy-Schwarz radicand, relative to `(v·v)(a·a)`.
const RADICAND_SLACK: f64 = 1e-9;

/// Minimum number of θ samples accepted by [`curve_geometry`].
pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveJet {
    pub thetas: Vec<f64>,
    pub h: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl CurveJet {
    pub fn new(thetas: Vec<f64>, h: DMatrix<f64>, v: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let t = thetas.len();
        let n = h.nrows();
        for (name, m) in [("h", &h), ("v", &v), ("a", &a)] {
            if m.ncols() != t || m.nrows() != n {
                return Err(invalid(
                    name,
                    format!(
                        "expected {n}x{t} (width x samples), got {}x{}",
                        m.nrows(),
                        m.ncols()
                    ),
                ));
            }
        }
        if thetas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("thetas", "must be strictly increasing"));
        }
        if let (Some(&lo), Some(&hi)) = (thetas.first(), thetas.last()) {
            if lo < 0.0 || hi >= 2.0 * PI {
                return Err(invalid("thetas", "must lie in [0, 2π)"));
            }
        }
        Ok(Self { thetas, h, v, a })
    }

    /// Circle `h(θ) = r (u0 cos θ + u1 sin θ)` with its exact derivatives.
    pub fn circle(thetas: &[f64], radius: f64, u0: &[f64], u1: &[f64]) -> Result<Self> {
        if u0.len() != u1.len() {
            return Err(Error::DimensionMismatch {
                expected: u0.len(),
                got: u1.len(),
            });
        }
        let n = u0.len();
        let t = thetas.len();
        let h = DMatrix::from_fn(n, t, |i, j| radius * (u0[i] * thetas[j].cos() + u1[i] * thetas[j].sin()));
        let v = DMatrix::from_fn(n, t, |i, j| radius * (-u0[i] * thetas[j].sin() + u1[i] * thetas[j].cos()));
        let a = -&h;
        Self::new(thetas.to_vec(), h, v, a)
    }

    pub fn width(&self) -> usize {
        self.h.nrows()
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveGeometry {
    pub g_e: Vec<f64>,
    pub kappa: Vec<f64>,
    pub g_g: Vec<f64>,
    pub le: f64,
    pub lg: f64,
    /// `g^E / N`.
    pub g_e_norm: Vec<f64>,
    /// `√N κ`.
    pub kappa_norm: Vec<f64>,
    /// `L^E / √N`.
    pub le_norm: f64,
}

/// `κ = (v·v)^{-3/2} √((v·v)(a·a) − (v·a)²)`.
pub fn extrinsic_curvature(v: &[f64], a: &[f64]) -> Result<f64> {
    if v.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            got: a.len(),
        });
    }
    curvature_from_dots(dot(v, v), dot(a, a), dot(v, a), None)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn curvature_from_dots(vv: f64, aa: f64, va: f64, theta: Option<f64>) -> Result<f64> {
    if !(vv > 0.0) {
        return Err(Error::DegenerateTangent { theta });
    }
    let scale = vv * aa;
    let mut rad = scale - va * va;
    if rad < 0.0 {
        if rad > -RADICAND_SLACK * scale {
            rad = 0.0;
        } else {
            return Err(Error::Numerical(format!(
                "curvature radicand {rad} is negative beyond roundoff (v·v = {vv}, a·a = {aa})"
            )));
        }
    }
    Ok(rad.sqrt() / vv.powf(1.5))
}

fn column(m: &DMatrix<f64>, j: usize) -> DVectorView<'_, f64> {
    m.column(j)
}

/// Periodic trapezoid rule `∮ f dθ` over a sorted grid in `[0, 2π)`.
pub fn periodic_trapezoid(thetas: &[f64], f: &[f64]) -> f64 {
    let t = thetas.len();
    let mut s = 0.0;
    for i in 0..t {
        let (next, gap) = if i + 1 < t {
            (f[i + 1], thetas[i + 1] - thetas[i])
        } else {
            (f[0], thetas[0] + 2.0 * PI - thetas[i])
        };
        s += 0.5 * (f[i] + next) * gap;
    }
    s
}

pub fn curve_geometry(jet: &CurveJet) -> Result<CurveGeometry> {
    let t = jet.len();
    if t < MIN_SAMPLES {
        return Err(invalid("thetas", format!("need >= {MIN_SAMPLES} samples, got {t}")));
    }
    let n = jet.width() as f64;
    let mut g_e = Vec::with_capacity(t);
    let mut kappa = Vec::with_capacity(t);
    for j in 0..t {
        let v = column(&jet.v, j);
        let a = column(&jet.a, j);
        let vv = v.dot(&v);
        let k = curvature_from_dots(vv, a.dot(&a), v.dot(&a), Some(jet.thetas[j]))?;
        g_e.push(vv);
        kappa.push(k);
    }
    let g_g: Vec<f64> = kappa.iter().zip(&g_e).map(|(k, g)| k * k * g).collect();
    let sqrt = |xs: &[f64]| xs.iter().map(|x| x.sqrt()).collect::<Vec<_>>();
    let le = periodic_trapezoid(&jet.thetas, &sqrt(&g_e));
    let lg = periodic_trapezoid(&jet.thetas, &sqrt(&g_g));
    Ok(CurveGeometry {
        g_e_norm: g_e.iter().map(|g| g / n).collect(),
        kappa_norm: kappa.iter().map(|k| k * n.sqrt()).collect(),
        le_norm: le / n.sqrt(),
        g_e,
        kappa,
        g_g,
        le,
        lg,
    })
}
