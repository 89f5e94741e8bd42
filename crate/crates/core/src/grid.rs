//! Sample grids shared by the sweeps and the simulators.

use std::f64::consts::PI;

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Uniform periodic grid `θ_k = 2πk / count`, `k = 0..count`.
pub fn theta_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| 2.0 * PI * k as f64 / count as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let v = linspace(0.1, 5.0, 50);
        assert_eq!(v.len(), 50);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[49], 5.0);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn theta_grid_is_half_open() {
        let t = theta_grid(8);
        assert_eq!(t[0], 0.0);
        assert!((t[7] - 2.0 * PI * 7.0 / 8.0).abs() < 1e-15);
    }
}
