use rayon::prelude::*;
use serde::Serialize;

use super::{bisect, CMap, EnsembleParams};
use crate::activations::Nonlinearity;
use crate::error::{invalid, Error, Result};
use crate::quadrature::Quadrature;

const BOUNDARY_BRACKET: (f64, f64) = (1e-3, 10.0);
const BOUNDARY_XTOL: f64 = 1e-12;
const BOUNDARY_CHI_TOL: f64 = 1e-8;

/// One `(σ_w, σ_b)` cell of a phase sweep. Fields are `None` where the
/// quantity is undefined or its computation failed; `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub q_star: Option<f64>,
    pub c_star: Option<f64>,
    pub c_star_converged: bool,
    pub chi1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub sigma_w_axis: Vec<f64>,
    pub sigma_b_axis: Vec<f64>,
    /// Row-major over `(σ_w, σ_b)`: cell `(i, j)` is at `i * n_b + j`.
    pub cells: Vec<PhaseCell>,
    /// `(σ_b, σ_w*)` with `χ₁(σ_w*, σ_b) = 1`, or the error for that `σ_b`.
    pub boundary: Vec<(f64, std::result::Result<f64, String>)>,
}

impl PhaseGrid {
    pub fn cell(&self, i_w: usize, i_b: usize) -> &PhaseCell {
        &self.cells[i_w * self.sigma_b_axis.len() + i_b]
    }
}

/// `σ_w*` solving `χ₁(σ_w*, σ_b) = 1`, by bisection on `σ_w ∈ [1e-3, 10]`.
pub fn phase_boundary(
    sigma_b: f64,
    nonlinearity: &Nonlinearity,
    quad: &Quadrature,
) -> Result<f64> {
    if !(sigma_b >= 0.0) {
        return Err(invalid("sigma_b", format!("must be >= 0, got {sigma_b}")));
    }
    let chi_minus_one = |sw: f64| -> Result<Option<f64>> {
        let p = EnsembleParams::new(sw, sigma_b, nonlinearity.clone())?;
        match CMap::new(&p, quad) {
            Ok(cm) => Ok(Some(cm.chi1()? - 1.0)),
            // Unbounded growth of the length map: the expanding side.
            Err(Error::NoConvergence { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let (lo, hi) = BOUNDARY_BRACKET;
    let root = bisect(lo, hi, BOUNDARY_XTOL, 200, "chi1 - 1", |sw| {
        Ok(chi_minus_one(sw)?.unwrap_or(1.0))
    })?;
    // Verify on whichever side of the final bracket has a fixed point.
    let residual = [root, root - BOUNDARY_XTOL, root + BOUNDARY_XTOL]
        .into_iter()
        .map(chi_minus_one)
        .find_map(|r| r.ok().flatten());
    match residual {
        Some(r) if r.abs() < BOUNDARY_CHI_TOL => Ok(root),
        Some(r) => Err(Error::Numerical(format!(
            "phase boundary at sigma_w = {root} has |chi1 - 1| = {}",
            r.abs()
        ))),
        None => Err(Error::NoConvergence {
            what: "phase boundary",
            iterations: 200,
            last: root,
        }),
    }
}

fn evaluate_cell(sigma_w: f64, sigma_b: f64, phi: &Nonlinearity, quad: &Quadrature) -> PhaseCell {
    let mut cell = PhaseCell {
        sigma_w,
        sigma_b,
        q_star: None,
        c_star: None,
        c_star_converged: false,
        chi1: None,
        error: None,
    };
    let run = |cell: &mut PhaseCell| -> Result<()> {
        let p = EnsembleParams::new(sigma_w, sigma_b, phi.clone())?;
        let cm = CMap::new(&p, quad)?;
        cell.q_star = Some(cm.q_star());
        cell.chi1 = Some(cm.chi1()?);
        let (c, ok) = cm.fixed_point()?;
        cell.c_star = Some(c);
        cell.c_star_converged = ok;
        Ok(())
    };
    if let Err(e) = run(&mut cell) {
        cell.error = Some(e.to_string());
    }
    cell
}

/// Sweeps `q*`, `c*` and `χ₁` over the grid and traces the `χ₁ = 1` curve.
///
/// Cell failures are recorded in the cell and never abort the sweep.
pub fn phase_grid(
    sigma_w_axis: &[f64],
    sigma_b_axis: &[f64],
    nonlinearity: &Nonlinearity,
    quad: &Quadrature,
) -> Result<PhaseGrid> {
    if sigma_w_axis.len() < 2 || sigma_b_axis.len() < 2 {
        return Err(invalid("grid", "each axis needs at least 2 samples"));
    }
    let n_b = sigma_b_axis.len();
    let cells: Vec<PhaseCell> = (0..sigma_w_axis.len() * n_b)
        .into_par_iter()
        .map(|k| evaluate_cell(sigma_w_axis[k / n_b], sigma_b_axis[k % n_b], nonlinearity, quad))
        .collect();
    let boundary = sigma_b_axis
        .par_iter()
        .map(|&sb| (sb, phase_boundary(sb, nonlinearity, quad).map_err(|e| e.to_string())))
        .collect();
    Ok(PhaseGrid {
        sigma_w_axis: sigma_w_axis.to_vec(),
        sigma_b_axis: sigma_b_axis.to_vec(),
        cells,
        boundary,
    })
}
