use serde::Serialize;

use super::{length_fixed_point, EnsembleParams, CORRELATION_MAX_ITERS, FIXED_POINT_TOL};
use crate::error::{invalid, Error, Result};
use crate::quadrature::Quadrature;

/// Stretch factors at the length fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiFactors {
    /// Slope of the C-map at `c = 1`.
    pub chi1: f64,
    /// `σ_w² E[φ″(√q* z)²]`; `None` for nonlinearities without a smooth φ″.
    pub chi2: Option<f64>,
    pub q_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTrajectory {
    /// `values[l - 1]` is `c^l`, starting from `c^1 = c0`.
    pub values: Vec<f64>,
    pub c_star: f64,
    /// False when the `c*` search hit its iteration cap (near criticality).
    pub c_star_converged: bool,
    pub chi: ChiFactors,
}

/// Next-layer covariance `q_12 = σ_w² E[φ(u1) φ(u2)] + σ_b²`.
pub fn correlation_map(
    c12: f64,
    q11: f64,
    q22: f64,
    params: &EnsembleParams,
    quad: &Quadrature,
) -> Result<f64> {
    if !(c12.abs() <= 1.0) {
        return Err(invalid("c12", format!("must lie in [-1, 1], got {c12}")));
    }
    let phi = &params.nonlinearity;
    let m = quad.expect_pair(|u1, u2| phi.value(u1) * phi.value(u2), c12, q11, q22)?;
    Ok(params.sw2() * m + params.sb2())
}

/// The normalized correlation map at a fixed ensemble, with `q*` cached.
#[derive(Debug, Clone)]
pub struct CMap<'a> {
    params: &'a EnsembleParams,
    quad: &'a Quadrature,
    q_star: f64,
}

impl<'a> CMap<'a> {
    pub fn new(params: &'a EnsembleParams, quad: &'a Quadrature) -> Result<Self> {
        let q_star = length_fixed_point(params, quad)?;
        Ok(Self {
            params,
            quad,
            q_star,
        })
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    fn require_positive_length(&self) -> Result<()> {
        if self.q_star > 0.0 {
            Ok(())
        } else {
            Err(Error::ZeroFixedPoint { what: "C-map" })
        }
    }

    /// `c ↦ C(c, q*, q*) / q*`.
    pub fn apply(&self, c: f64) -> Result<f64> {
        self.require_positive_length()?;
        let q = self.q_star;
        Ok(correlation_map(c, q, q, self.params, self.quad)? / q)
    }

    pub fn chi1(&self) -> Result<f64> {
        let phi = &self.params.nonlinearity;
        let m = self.quad.expect_scaled(
            |u| {
                let d = phi.deriv1(u);
                d * d
            },
            self.q_star,
        )?;
        Ok(self.params.sw2() * m)
    }

    pub fn chi2(&self) -> Result<f64> {
        let phi = &self.params.nonlinearity;
        phi.require_smooth("chi2")?;
        let m = self.quad.expect_scaled(
            |u| {
                let d = phi.deriv2(u);
                d * d
            },
            self.q_star,
        )?;
        Ok(self.params.sw2() * m)
    }

    pub fn chi_factors(&self) -> Result<ChiFactors> {
        let chi2 = if self.params.nonlinearity.has_smooth_second_derivative() {
            Some(self.chi2()?)
        } else {
            None
        };
        Ok(ChiFactors {
            chi1: self.chi1()?,
            chi2,
            q_star: self.q_star,
        })
    }

    /// Stable fixed point `c*`, iterated from `c = 0.999`.
    ///
    /// Plain iteration with Aitken extrapolation whenever the last two
    /// steps contract, so unstable fixed points are never targeted.
    /// Returns the last iterate and whether the successive change fell
    /// below `1e-12` within the cap on map evaluations.
    pub fn fixed_point(&self) -> Result<(f64, bool)> {
        let f = |c: f64| -> Result<f64> { Ok(self.apply(c)?.clamp(-1.0, 1.0)) };
        let mut c = 0.999;
        let mut evals = 0;
        while evals < CORRELATION_MAX_ITERS {
            let c1 = f(c)?;
            if (c1 - c).abs() < FIXED_POINT_TOL {
                return Ok((c1, true));
            }
            let c2 = f(c1)?;
            evals += 2;
            if (c2 - c1).abs() < FIXED_POINT_TOL {
                return Ok((c2, true));
            }
            let r = (c2 - c1) / (c1 - c);
            c = if r.abs() < 0.95 {
                (c2 + r / (1.0 - r) * (c2 - c1)).clamp(-1.0, 1.0)
            } else {
                c2
            };
        }
        Ok((c, false))
    }

    pub fn trajectory(&self, c0: f64, depth: usize) -> Result<CorrelationTrajectory> {
        if !(c0.abs() <= 1.0) {
            return Err(invalid("c0", format!("must lie in [-1, 1], got {c0}")));
        }
        if depth == 0 {
            return Err(invalid("depth", "must be >= 1"));
        }
        self.require_positive_length()?;
        let mut values = Vec::with_capacity(depth);
        let mut c = c0;
        values.push(c);
        for _ in 1..depth {
            c = self.apply(c)?.clamp(-1.0, 1.0);
            values.push(c);
        }
        let (c_star, c_star_converged) = self.fixed_point()?;
        Ok(CorrelationTrajectory {
            values,
            c_star,
            c_star_converged,
            chi: self.chi_factors()?,
        })
    }
}

pub fn c_map(c: f64, params: &EnsembleParams, quad: &Quadrature) -> Result<f64> {
    CMap::new(params, quad)?.apply(c)
}

pub fn chi1(params: &EnsembleParams, quad: &Quadrature) -> Result<f64> {
    CMap::new(params, quad)?.chi1()
}

pub fn chi2(params: &EnsembleParams, quad: &Quadrature) -> Result<f64> {
    params.nonlinearity.require_smooth("chi2")?;
    CMap::new(params, quad)?.chi2()
}

pub fn chi_factors(params: &EnsembleParams, quad: &Quadrature) -> Result<ChiFactors> {
    CMap::new(params, quad)?.chi_factors()
}

pub fn correlation_trajectory(
    c0: f64,
    depth: usize,
    params: &EnsembleParams,
    quad: &Quadrature,
) -> Result<CorrelationTrajectory> {
    CMap::new(params, quad)?.trajectory(c0, depth)
}
