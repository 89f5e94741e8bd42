//! Scalar nonlinearities with analytic first and second derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub const BUILTINS: [&str; 4] = ["tanh", "linear", "hard_tanh", "relu"];

/// A pointwise nonlinearity together with the metadata the theory relies on.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    value: ScalarFn,
    deriv1: ScalarFn,
    deriv2: ScalarFn,
    monotone_nondecreasing: bool,
    dynamic_range: Option<f64>,
    smooth: bool,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("monotone_nondecreasing", &self.monotone_nondecreasing)
            .field("dynamic_range", &self.dynamic_range)
            .field("smooth", &self.smooth)
            .finish()
    }
}

impl Nonlinearity {
    /// A user-supplied nonlinearity from its value and two derivatives.
    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        monotone_nondecreasing: bool,
        dynamic_range: Option<f64>,
        has_smooth_second_derivative: bool,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            deriv1: Arc::new(deriv1),
            deriv2: Arc::new(deriv2),
            monotone_nondecreasing,
            dynamic_range,
            smooth: has_smooth_second_derivative,
        }
    }

    pub fn tanh() -> Self {
        Self::custom(
            "tanh",
            f64::tanh,
            |h| {
                let t = h.tanh();
                1.0 - t * t
            },
            |h| {
                let t = h.tanh();
                -2.0 * t * (1.0 - t * t)
            },
            true,
            Some(2.0),
            true,
        )
    }

    pub fn linear() -> Self {
        Self::custom("linear", |h| h, |_| 1.0, |_| 0.0, true, None, true)
    }

    pub fn hard_tanh() -> Self {
        Self::custom(
            "hard_tanh",
            |h| h.clamp(-1.0, 1.0),
            |h| if h.abs() < 1.0 { 1.0 } else { 0.0 },
            |_| 0.0,
            true,
            Some(2.0),
            false,
        )
    }

    pub fn relu() -> Self {
        Self::custom(
            "relu",
            |h| h.max(0.0),
            |h| if h > 0.0 { 1.0 } else { 0.0 },
            |_| 0.0,
            true,
            None,
            false,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn value(&self, h: f64) -> f64 {
        (self.value)(h)
    }

    #[inline]
    pub fn deriv1(&self, h: f64) -> f64 {
        (self.deriv1)(h)
    }

    #[inline]
    pub fn deriv2(&self, h: f64) -> f64 {
        (self.deriv2)(h)
    }

    pub fn monotone_nondecreasing(&self) -> bool {
        self.monotone_nondecreasing
    }

    /// `max φ - min φ`, or `None` when unbounded.
    pub fn dynamic_range(&self) -> Option<f64> {
        self.dynamic_range
    }

    pub fn has_smooth_second_derivative(&self) -> bool {
        self.smooth
    }

    /// Fails with [`Error::UnsupportedActivation`] unless φ″ is a genuine function.
    pub fn require_smooth(&self, operation: &'static str) -> Result<()> {
        if self.smooth {
            Ok(())
        } else {
            Err(Error::UnsupportedActivation {
                name: self.name.clone(),
                operation,
            })
        }
    }
}

/// Looks up one of the built-in nonlinearities by name.
pub fn builtin(name: &str) -> Result<Nonlinearity> {
    match name {
        "tanh" => Ok(Nonlinearity::tanh()),
        "linear" => Ok(Nonlinearity::linear()),
        "hard_tanh" => Ok(Nonlinearity::hard_tanh()),
        "relu" => Ok(Nonlinearity::relu()),
        other => Err(Error::UnknownNonlinearity {
            name: other.to_string(),
            available: BUILTINS.join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> impl Iterator<Item = f64> {
        (0..=200).map(|i| -5.0 + 0.05 * i as f64)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let step = 1e-5;
        for name in BUILTINS {
            let phi = builtin(name).unwrap();
            if !phi.has_smooth_second_derivative() {
                continue;
            }
            for h in grid() {
                let fd1 = (phi.value(h + step) - phi.value(h - step)) / (2.0 * step);
                assert!((fd1 - phi.deriv1(h)).abs() < 1e-6, "{name} φ′ at {h}");
                let fd2 = (phi.deriv1(h + step) - phi.deriv1(h - step)) / (2.0 * step);
                assert!((fd2 - phi.deriv2(h)).abs() < 1e-5, "{name} φ″ at {h}");
            }
        }
    }

    #[test]
    fn monotone_builtins_have_nonnegative_slope() {
        for name in BUILTINS {
            let phi = builtin(name).unwrap();
            assert!(phi.monotone_nondecreasing());
            assert!(grid().all(|h| phi.deriv1(h) >= 0.0));
        }
    }

    #[test]
    fn tanh_at_origin() {
        let t = Nonlinearity::tanh();
        assert_eq!(t.value(0.0), 0.0);
        assert_eq!(t.deriv1(0.0), 1.0);
        assert_eq!(t.deriv2(0.0), 0.0);
        assert_eq!(t.dynamic_range(), Some(2.0));
    }

    #[test]
    fn metadata() {
        assert_eq!(Nonlinearity::linear().deriv2(3.7), 0.0);
        assert_eq!(Nonlinearity::linear().dynamic_range(), None);
        assert_eq!(Nonlinearity::hard_tanh().dynamic_range(), Some(2.0));
        assert!(!Nonlinearity::hard_tanh().has_smooth_second_derivative());
        assert!(!Nonlinearity::relu().has_smooth_second_derivative());
        assert!(Nonlinearity::relu().require_smooth("chi2").is_err());
        assert!(Nonlinearity::tanh().require_smooth("chi2").is_ok());
    }

    #[test]
    fn unknown_name_lists_builtins() {
        let err = builtin("softplus").unwrap_err();
        let msg = err.to_string();
        for name in BUILTINS {
            assert!(msg.contains(name), "{msg}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn tanh_parity(h in -20.0f64..20.0) {
            let t = Nonlinearity::tanh();
            prop_assert_eq!(t.value(-h), -t.value(h));
            prop_assert_eq!(t.deriv1(-h), t.deriv1(h));
            prop_assert_eq!(t.deriv2(-h), -t.deriv2(h));
        }
    }
}
