use serde::Serialize;

use crate::compose::{compose, simulate};
use crate::error::{Error, Result};

/// Smallest marginal gain kept after repair, so repaired curves are strictly
/// decreasing even where the raw curve has flattened to rounding noise.
const MIN_GAIN: f64 = 1e-14;

/// Projected residual error `E(k)` for each step count in `[k_min, k_max]`.
///
/// `values` is what the allocator consumes: non-increasing in `k` with
/// non-increasing marginal gains. `raw` keeps the unrepaired simulation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub k_min: usize,
    pub values: Vec<f64>,
    pub raw: Vec<f64>,
}

impl ErrorCurve {
    /// Wraps already-shaped values without repair.
    pub fn from_values(k_min: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("error curve needs at least one value".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("error curve values must be finite".into()));
        }
        Ok(Self { k_min, raw: values.clone(), values })
    }

    /// Builds a curve from raw values, enforcing monotonicity and convexity.
    pub fn repaired(k_min: usize, raw: Vec<f64>) -> Result<Self> {
        let mut curve = Self::from_values(k_min, raw)?;
        curve.values = repair(&curve.raw);
        Ok(curve)
    }

    pub fn k_max(&self) -> usize {
        self.k_min + self.values.len() - 1
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.k_min).and_then(|i| self.values.get(i)).copied()
    }

    /// `E(k)`. Panics outside the curve's range.
    pub fn at(&self, k: usize) -> f64 {
        self.get(k)
            .unwrap_or_else(|| panic!("k={k} outside [{}, {}]", self.k_min, self.k_max()))
    }

    /// `E(k) − E(k+1)`, the error removed by one extra step from `k`.
    pub fn marginal_gain(&self, k: usize) -> f64 {
        self.at(k) - self.at(k + 1)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// Discrete convexity: marginal gains never grow with `k`, up to rounding
    /// in the re-accumulated values.
    pub fn has_diminishing_returns(&self) -> bool {
        self.values.windows(3).all(|w| w[1] - w[2] <= w[0] - w[1] + 1e-12)
    }
}

/// Isotonic regression of the gains (pool adjacent violators, non-increasing),
/// floored at [`MIN_GAIN`], then re-accumulated from the raw value at `k_max`.
fn repair(raw: &[f64]) -> Vec<f64> {
    let gains: Vec<f64> = raw.windows(2).map(|w| w[0] - w[1]).collect();
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(gains.len());
    for &g in &gains {
        blocks.push((g, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 >= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
        }
    }
    let pooled = blocks
        .into_iter()
        .flat_map(|(s, n)| std::iter::repeat_n((s / n as f64).max(MIN_GAIN), n));
    let mut out = vec![*raw.last().unwrap(); raw.len()];
    for (i, g) in pooled.collect::<Vec<_>>().into_iter().enumerate().rev() {
        out[i] = out[i + 1] + g;
    }
    out
}

pub fn error_curve(ell: f64, k_min: usize, k_max: usize) -> Result<ErrorCurve> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::Config(format!("invalid step range [{k_min}, {k_max}]")));
    }
    let raw = (k_min..=k_max)
        .map(|k| {
            let lower = simulate(ell, &compose(ell, k)?)?.final_lower();
            Ok((1.0 - lower).max(0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorCurve::repaired(k_min, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn curve_at_one_thousandth_is_shaped() {
        let c = error_curve(1e-3, 3, 7).unwrap();
        assert_eq!(c.values.len(), 5);
        assert!(c.values.windows(2).all(|w| w[1] < w[0]));
        assert!(c.has_diminishing_returns());
        assert_eq!(c.values[4], c.raw[4]);
    }

    #[test]
    fn near_orthogonal_input_needs_no_work() {
        let c = error_curve(0.99, 3, 7).unwrap();
        assert!(c.values.iter().all(|&e| e <= 1e-4), "{:?}", c.values);
    }

    #[test]
    fn smaller_ell_costs_more_everywhere() {
        let hard = error_curve(1e-4, 3, 7).unwrap();
        let easy = error_curve(1e-2, 3, 7).unwrap();
        for k in 3..=7 {
            assert!(hard.at(k) >= easy.at(k), "k={k}");
        }
    }

    #[test]
    fn raw_lower_bound_grows_with_steps() {
        for ell in [1e-5, 3e-4, 1e-3, 0.05, 0.5] {
            let c = error_curve(ell, 1, 10).unwrap();
            assert!(c.raw.windows(2).all(|w| w[1] <= w[0] + 1e-9), "ell={ell}");
        }
    }

    #[test]
    fn repair_fixes_a_bump() {
        // gains 0.5, 0.1, 0.3 -> pooled 0.5, 0.2, 0.2
        let c = ErrorCurve::repaired(3, vec![1.0, 0.5, 0.4, 0.1]).unwrap();
        let want = [1.0, 0.5, 0.3, 0.1];
        for (g, w) in c.values.iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
        assert!(c.has_diminishing_returns());
        assert_eq!(c.k_max(), 6);
        assert_eq!(c.get(7), None);
        assert!((c.marginal_gain(4) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(error_curve(1e-3, 5, 4).is_err());
        assert!(error_curve(1e-3, 0, 4).is_err());
        assert!(ErrorCurve::from_values(3, vec![]).is_err());
        assert!(ErrorCurve::from_values(3, vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn repaired_curves_are_strictly_decreasing_and_convex(
            raw in prop::collection::vec(0.0f64..1.0, 2..9)
        ) {
            let c = ErrorCurve::repaired(1, raw).unwrap();
            prop_assert!(c.values.windows(2).all(|w| w[1] < w[0]));
            prop_assert!(c.has_diminishing_returns());
        }
    }
}
