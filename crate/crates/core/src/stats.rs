//! Scan statistics: slope fits and the stabilization rule used to call a
//! sampled family bounded.

use serde::{Deserialize, Serialize};

pub use crate::numeric::least_squares;

/// Which side of a scan must stay bounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    /// Running minimum must stabilize (bounded below).
    Below,
    /// Running maximum must stabilize (bounded above).
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    pub bound: Bound,
    /// Running extreme at the top of the scan.
    pub extreme: f64,
    /// Movement of the running extreme over the last decade of the scan
    /// parameter (always reported as a nonnegative number).
    pub last_decade_change: f64,
    /// `max - min` over all samples.
    pub total_range: f64,
    pub stabilized: bool,
}

/// Stabilization rule: the running extreme moves by less than 1% of the total
/// range over the last decade of `lambdas` (which must be increasing and span
/// at least one decade).
pub fn stabilization(lambdas: &[f64], values: &[f64], bound: Bound) -> Stabilization {
    assert_eq!(lambdas.len(), values.len());
    assert!(!lambdas.is_empty(), "empty scan");
    assert!(lambdas.windows(2).all(|w| w[0] < w[1]), "scan parameter must increase");
    let top = *lambdas.last().unwrap();
    assert!(top / lambdas[0] >= 10.0 * (1.0 - 1e-12), "scan must span a decade");
    let running: Vec<f64> = values
        .iter()
        .scan(None::<f64>, |acc, &v| {
            let next = match (*acc, bound) {
                (None, _) => v,
                (Some(a), Bound::Below) => a.min(v),
                (Some(a), Bound::Above) => a.max(v),
            };
            *acc = Some(next);
            Some(next)
        })
        .collect();
    // running extreme at the last sample with lambda <= top / 10
    let cut = top / 10.0 * (1.0 + 1e-12);
    let k = lambdas.iter().rposition(|&l| l <= cut).unwrap_or(0);
    let extreme = *running.last().unwrap();
    let last_decade_change = (extreme - running[k]).abs();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let total_range = hi - lo;
    Stabilization {
        bound,
        extreme,
        last_decade_change,
        total_range,
        stabilized: last_decade_change <= 0.01 * total_range,
    }
}

/// Relative deviation `|value - target| / |target|`.
pub fn relative_deviation(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        crate::numeric::geometric_grid(1.0, 1e4, 17)
    }

    #[test]
    fn saturating_family_stabilizes() {
        let l = grid();
        let v: Vec<f64> = l.iter().map(|x| -1.0 + 1.0 / x).collect();
        assert!(stabilization(&l, &v, Bound::Below).stabilized);
    }

    #[test]
    fn logarithmic_descent_does_not() {
        let l = grid();
        let v: Vec<f64> = l.iter().map(|x| -x.ln()).collect();
        let s = stabilization(&l, &v, Bound::Below);
        assert!(!s.stabilized);
        assert!((s.last_decade_change - 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn constant_family_is_stable() {
        let l = grid();
        let v = vec![3.0; l.len()];
        assert!(stabilization(&l, &v, Bound::Above).stabilized);
    }

    proptest! {
        #[test]
        fn bounded_above_mirrors_bounded_below(vals in proptest::collection::vec(-10.0f64..10.0, 17)) {
            let l = grid();
            let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
            let a = stabilization(&l, &vals, Bound::Above);
            let b = stabilization(&l, &neg, Bound::Below);
            prop_assert_eq!(a.stabilized, b.stabilized);
            prop_assert!((a.last_decade_change - b.last_decade_change).abs() < 1e-12);
        }
    }
}
