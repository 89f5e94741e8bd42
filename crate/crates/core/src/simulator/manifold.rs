use nalgebra::DMatrix;

use super::{gaussian_vector, stream_rng, LayerRecord, NetworkRealization, STREAM_CIRCLE};
use crate::error::{invalid, Error, Result};
use crate::geometry::CurveJet;

/// A great circle `h¹(θ) = √(N q) (u0 cos θ + u1 sin θ)` in layer-1 space.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleManifold {
    pub width: usize,
    /// Squared radius per neuron.
    pub q: f64,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl CircleManifold {
    /// Orthonormal `u0, u1` from two Gaussian vectors by Gram-Schmidt
    /// (drawn from the circle stream of `seed`).
    pub fn sample(width: usize, q: f64, thetas: Vec<f64>, seed: u64) -> Result<Self> {
        if width < 2 {
            return Err(invalid("width", "a circle needs width >= 2"));
        }
        if !(q >= 0.0) || !q.is_finite() {
            return Err(invalid("q", format!("must be finite and >= 0, got {q}")));
        }
        let mut rng = stream_rng(seed, STREAM_CIRCLE);
        let g0 = gaussian_vector(&mut rng, width, 1.0);
        let g1 = gaussian_vector(&mut rng, width, 1.0);
        let u0 = &g0 / g0.norm();
        // Two passes keep u0·u1 at roundoff level.
        let mut u1 = &g1 - &u0 * u0.dot(&g1);
        u1 -= &u0 * u0.dot(&u1);
        let n1 = u1.norm();
        if !(n1 > 0.0) {
            return Err(Error::Numerical("degenerate circle basis".into()));
        }
        u1 /= n1;
        Ok(Self {
            width,
            q,
            u0: u0.iter().copied().collect(),
            u1: u1.iter().copied().collect(),
            thetas,
        })
    }

    pub fn radius(&self) -> f64 {
        (self.width as f64 * self.q).sqrt()
    }

    /// The exact layer-1 jet on this circle's θ grid.
    pub fn jet(&self) -> Result<CurveJet> {
        CurveJet::circle(&self.thetas, self.radius(), &self.u0, &self.u1)
    }

    /// Points at arbitrary angles (columns of the result).
    pub fn points(&self, thetas: &[f64]) -> DMatrix<f64> {
        let r = self.radius();
        DMatrix::from_fn(self.width, thetas.len(), |i, j| {
            r * (self.u0[i] * thetas[j].cos() + self.u1[i] * thetas[j].sin())
        })
    }
}

/// How many θ-derivatives [`forward_jet`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOrder {
    Velocity,
    Acceleration,
}

/// Propagates a layer-1 jet through layers `2..=D` by the chain rule:
/// `v^l = W^l (φ′(h^{l-1}) ⊙ v^{l-1})` and
/// `a^l = W^l (φ″(h^{l-1}) ⊙ v^{l-1} ⊙ v^{l-1} + φ′(h^{l-1}) ⊙ a^{l-1})`.
///
/// Returns records for layers `1..=D`, the first being the input jet.
pub fn forward_jet(net: &NetworkRealization, jet: &CurveJet, order: JetOrder) -> Result<Vec<LayerRecord>> {
    if jet.width() != net.width(1) {
        return Err(Error::DimensionMismatch {
            expected: net.width(1),
            got: jet.width(),
        });
    }
    let phi = &net.nonlinearity;
    let with_a = order == JetOrder::Acceleration;
    if with_a {
        phi.require_smooth("acceleration propagation")?;
    }
    let mut records = Vec::with_capacity(net.depth());
    records.push(LayerRecord {
        layer: 1,
        h: jet.h.clone(),
        v: Some(jet.v.clone()),
        a: with_a.then(|| jet.a.clone()),
    });
    for l in 2..=net.depth() {
        let prev = records.last().expect("layer 1 present");
        let w = &net.weights[l - 1];
        let d1 = prev.h.map(|x| phi.deriv1(x));
        let v_prev = prev.v.as_ref().expect("velocity carried");
        let h = net.layer_apply(l, &prev.h)?;
        let v = w * d1.component_mul(v_prev);
        let a = if with_a {
            let d2 = prev.h.map(|x| phi.deriv2(x));
            let a_prev = prev.a.as_ref().expect("acceleration carried");
            let inner = d2.component_mul(&v_prev.component_mul(v_prev)) + d1.component_mul(a_prev);
            Some(w * inner)
        } else {
            None
        };
        records.push(LayerRecord {
            layer: l,
            h,
            v: Some(v),
            a,
        });
    }
    Ok(records)
}

impl LayerRecord {
    /// The record as a curve jet on `thetas`; needs both derivatives.
    pub fn to_jet(&self, thetas: &[f64]) -> Result<CurveJet> {
        match (&self.v, &self.a) {
            (Some(v), Some(a)) => CurveJet::new(thetas.to_vec(), self.h.clone(), v.clone(), a.clone()),
            _ => Err(invalid("record", "jet needs velocity and acceleration")),
        }
    }
}
