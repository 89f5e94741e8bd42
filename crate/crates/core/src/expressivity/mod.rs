//! Expressivity experiments: the shallow-network length bound, Fourier
//! regression of output activations, and correlations across a family of
//! networks with interpolated second-layer weights.

mod bound;
mod fourier;
mod weight_chaos;

pub use bound::{growth_exponent, shallow_length_bound, verify_shallow_bound, ShallowBoundReport, ShallowBoundSpec};
pub use fourier::{
    circle_input_activations, fourier_error_profile, random_target_error, FourierProbe, FrequencyError,
};
pub use weight_chaos::{
    interpolated_weights, weight_chaos_empirical, weight_chaos_theory, WeightChaosFamily,
    WeightChaosRow,
};
