//! Finite-width random networks and the measurements compared against the
//! mean-field theory.
//!
//! Randomness comes from ChaCha8 streams: one seed fans out into independent
//! streams per layer (weights on stream `2l`, biases on `2l + 1`), so
//! truncating a network's depth never changes its shallower layers.
//! Gaussian variates use the ziggurat sampler of `rand_distr::StandardNormal`
//! and matrices are filled in column-major order.

mod export;
mod manifold;
mod measure;

pub use export::{read_network, records_csv, write_network};
pub use manifold::{forward_jet, CircleManifold, JetOrder};
pub use measure::{
    autocorrelation, empirical_correlation, empirical_length, singular_spectrum, EmpiricalCorrelation,
    SingularSpectrum,
};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activations::Nonlinearity;
use crate::error::{invalid, Error, Result};
use crate::meanfield::EnsembleParams;

/// Stream reserved for the circle basis vectors.
pub const STREAM_CIRCLE: u64 = 1 << 40;
/// Stream reserved for random input vectors.
pub const STREAM_INPUT: u64 = (1 << 40) + 1;
/// First of the streams for auxiliary per-layer draws (e.g. weight perturbations).
pub const STREAM_AUX: u64 = 1 << 41;

/// The generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `rows × cols` matrix of i.i.d. `N(0, scale²)` entries, column-major draw order.
pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// One sampled network. `weights[l - 1]` is `W^l` with shape `N_l × N_{l-1}`.
#[derive(Debug, Clone)]
pub struct NetworkRealization {
    pub widths: Vec<usize>,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub nonlinearity: Nonlinearity,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub seed: u64,
}

/// Pre-activations (and optionally their θ-derivatives) at one layer.
/// Columns index inputs or θ samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub layer: usize,
    pub h: DMatrix<f64>,
    pub v: Option<DMatrix<f64>>,
    pub a: Option<DMatrix<f64>>,
}

/// Samples `W^l_{ij} ~ N(0, σ_w²/N_{l-1})` and `b^l_i ~ N(0, σ_b²)`.
///
/// `widths` lists `N_0..N_D`. `σ_w = 0` is allowed here (all weights zero),
/// unlike in the mean-field ensemble.
pub fn sample_network(
    widths: &[usize],
    sigma_w: f64,
    sigma_b: f64,
    nonlinearity: &Nonlinearity,
    seed: u64,
) -> Result<NetworkRealization> {
    if widths.len() < 2 {
        return Err(invalid("widths", "need N_0 and at least one layer width"));
    }
    if widths.iter().any(|&n| n == 0) {
        return Err(invalid("widths", "all widths must be >= 1"));
    }
    if !(sigma_w >= 0.0) || !(sigma_b >= 0.0) || !sigma_w.is_finite() || !sigma_b.is_finite() {
        return Err(invalid("sigma", format!("need finite sigma_w, sigma_b >= 0, got ({sigma_w}, {sigma_b})")));
    }
    let mut weights = Vec::with_capacity(widths.len() - 1);
    let mut biases = Vec::with_capacity(widths.len() - 1);
    for l in 1..widths.len() {
        let (rows, cols) = (widths[l], widths[l - 1]);
        let mut rng = stream_rng(seed, 2 * l as u64);
        weights.push(gaussian_matrix(&mut rng, rows, cols, sigma_w / (cols as f64).sqrt()));
        let mut rng = stream_rng(seed, 2 * l as u64 + 1);
        biases.push(gaussian_vector(&mut rng, rows, sigma_b));
    }
    Ok(NetworkRealization {
        widths: widths.to_vec(),
        weights,
        biases,
        nonlinearity: nonlinearity.clone(),
        sigma_w,
        sigma_b,
        seed,
    })
}

impl NetworkRealization {
    pub fn sample(widths: &[usize], params: &EnsembleParams, seed: u64) -> Result<Self> {
        sample_network(widths, params.sigma_w, params.sigma_b, &params.nonlinearity, seed)
    }

    /// Number of weight layers `D`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer]
    }

    /// `h^l = W^l φ(h^{l-1}) + b^l` for every column of `prev` (`h^{l-1}`).
    /// For `l = 1` the input `x^0` is used without the nonlinearity.
    pub fn layer_apply(&self, layer: usize, prev: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if layer == 0 || layer > self.depth() {
            return Err(invalid("layer", format!("must lie in 1..={}, got {layer}", self.depth())));
        }
        let w = &self.weights[layer - 1];
        if prev.nrows() != w.ncols() {
            return Err(Error::DimensionMismatch {
                expected: w.ncols(),
                got: prev.nrows(),
            });
        }
        let mut out = if layer == 1 {
            w * prev
        } else {
            let phi = &self.nonlinearity;
            w * prev.map(|x| phi.value(x))
        };
        let b = &self.biases[layer - 1];
        for mut col in out.column_iter_mut() {
            col += b;
        }
        Ok(out)
    }

    /// Pre-activations `h^{start+1}..h^D` given `h^start` (or `x^0` when `start = 0`).
    pub fn propagate_from(&self, start: usize, h: DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        let mut out = Vec::with_capacity(self.depth().saturating_sub(start));
        let mut cur = h;
        for l in start + 1..=self.depth() {
            cur = self.layer_apply(l, &cur)?;
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// `h^1..h^D` for each column of `x0` (shape `N_0 × batch`).
    pub fn forward_batch(&self, x0: &DMatrix<f64>) -> Result<Vec<LayerRecord>> {
        Ok(self
            .propagate_from(0, x0.clone())?
            .into_iter()
            .enumerate()
            .map(|(i, h)| LayerRecord {
                layer: i + 1,
                h,
                v: None,
                a: None,
            })
            .collect())
    }

    /// Output activations `x^D = φ(h^D)` for each column of `x0`.
    pub fn output(&self, x0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let phi = &self.nonlinearity;
        let last = self.propagate_from(0, x0.clone())?.pop().expect("depth >= 1");
        Ok(last.map(|x| phi.value(x)))
    }
}

/// Exact forward pass of a single input.
pub fn forward(net: &NetworkRealization, x0: &[f64]) -> Result<Vec<LayerRecord>> {
    if x0.len() != net.widths[0] {
        return Err(Error::DimensionMismatch {
            expected: net.widths[0],
            got: x0.len(),
        });
    }
    net.forward_batch(&DMatrix::from_column_slice(x0.len(), 1, x0))
}

/// A random input of width `n` with `(1/n)‖x‖² = q0` exactly.
pub fn input_with_length(n: usize, q0: f64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || !(q0 >= 0.0) {
        return Err(invalid("input", format!("need n >= 1 and q0 >= 0, got ({n}, {q0})")));
    }
    let mut rng = stream_rng(seed, STREAM_INPUT);
    let g = gaussian_vector(&mut rng, n, 1.0);
    let norm = g.norm();
    if norm == 0.0 {
        return Err(Error::Numerical("zero-norm random input".into()));
    }
    let scale = (n as f64 * q0).sqrt() / norm;
    Ok(g.iter().map(|x| x * scale).collect())
}
