use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::stats::{dot, sum, CompensatedSum};

/// `q = (1/N) Σ h_i²`.
pub fn empirical_length(h: &[f64]) -> Result<f64> {
    if h.is_empty() {
        return Err(invalid("h", "empty vector"));
    }
    Ok(dot(h, h) / h.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCorrelation {
    pub q11: f64,
    pub q22: f64,
    pub q12: f64,
    pub c12: f64,
}

pub fn empirical_correlation(ha: &[f64], hb: &[f64]) -> Result<EmpiricalCorrelation> {
    if ha.len() != hb.len() {
        return Err(Error::DimensionMismatch {
            expected: ha.len(),
            got: hb.len(),
        });
    }
    let q11 = empirical_length(ha)?;
    let q22 = empirical_length(hb)?;
    if q11 == 0.0 || q22 == 0.0 {
        return Err(Error::Numerical("correlation undefined for a zero vector".into()));
    }
    let q12 = dot(ha, hb) / ha.len() as f64;
    Ok(EmpiricalCorrelation {
        q11,
        q22,
        q12,
        c12: q12 / (q11 * q22).sqrt(),
    })
}

/// `c(Δθ_k) = (1/T) Σ_j (1/N) h(θ_j)·h(θ_{j+k}) / q*` on a uniform periodic
/// grid, for lags `k = 0..T`. Columns of `h` are the θ samples.
pub fn autocorrelation(h: &DMatrix<f64>, q_star: f64) -> Result<Vec<f64>> {
    if !(q_star > 0.0) {
        return Err(Error::ZeroFixedPoint { what: "autocorrelation" });
    }
    let (n, t) = h.shape();
    if n == 0 || t == 0 {
        return Err(invalid("h", "empty record"));
    }
    let gram = h.transpose() * h;
    Ok((0..t)
        .map(|k| {
            let s: CompensatedSum = (0..t).map(|j| gram[(j, (j + k) % t)]).collect();
            s.value() / (t as f64 * n as f64 * q_star)
        })
        .collect())
}

/// Singular values of the mean-centered `T × N` record matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpectrum {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// True when every sample is identical and the spectrum is all zero.
    pub degenerate: bool,
}

impl SingularSpectrum {
    /// Share of total variance in the top `k` singular values.
    pub fn variance_fraction(&self, k: usize) -> f64 {
        let total = sum(self.values.iter().map(|s| s * s));
        if total == 0.0 {
            return 0.0;
        }
        sum(self.values.iter().take(k).map(|s| s * s)) / total
    }

    /// Cumulative variance fractions for `k = 1..=len`.
    pub fn cumulative_fractions(&self) -> Vec<f64> {
        (1..=self.values.len()).map(|k| self.variance_fraction(k)).collect()
    }
}

/// Spectrum of the samples in the columns of `h` after removing their mean.
pub fn singular_spectrum(h: &DMatrix<f64>) -> Result<SingularSpectrum> {
    let (n, t) = h.shape();
    if t < 2 || n == 0 {
        return Err(invalid("h", format!("need >= 2 samples of width >= 1, got {n}x{t}")));
    }
    let mut centered = h.clone();
    for mut row in centered.row_iter_mut() {
        let m = sum(row.iter().copied()) / t as f64;
        row.add_scalar_mut(-m);
    }
    let scale = h.amax();
    if centered.amax() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Ok(SingularSpectrum {
            values: vec![0.0; n.min(t)],
            degenerate: true,
        });
    }
    let mut values: Vec<f64> = centered.transpose().singular_values().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SingularSpectrum {
        values,
        degenerate: false,
    })
}
