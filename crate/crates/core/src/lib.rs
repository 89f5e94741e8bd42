//! Mean-field theory of signal propagation in random deep networks, with
//! finite-width simulators to check every prediction.

pub mod activations;
pub mod boundary;
pub mod error;
pub mod expressivity;
pub mod geometry;
pub mod grid;
pub mod meanfield;
pub mod quadrature;
pub mod simulator;
pub mod stats;
pub mod validation;

pub use activations::Nonlinearity;
pub use error::{Error, Result};
pub use meanfield::EnsembleParams;
pub use quadrature::{Quadrature, QuadratureRule, ResolvedTrapezoid};
