//! Polynomial-ell composition of per-step quintic coefficients.
//!
//! Given a lower bound `ell` on the normalized spectrum and a step budget,
//! [`compose`] picks each step's quintic greedily: the minimax approximation
//! to 1 on the current interval, recentred so the image straddles 1, then
//! deflated by the safety scale (except on the final step) so that the upper
//! end never overshoots the region the next step was designed for.

mod cache;
mod curve;
mod locked;
mod quintic;
mod trajectory;

pub use cache::{quantize_ell, ScheduleCache};
pub use curve::{error_curve, ErrorCurve};
pub use locked::{locked_schedule, locked_schedules, LockedSchedule, LOCKED_MODELS};
pub use quintic::optimal_quintic;
pub use trajectory::{interval_image, simulate, ScalarTrajectory};

use crate::error::{Error, Result};
use crate::ns::{CoefficientSchedule, CoefficientTriplet, SAFETY_SCALE};

pub const MIN_ELL: f64 = 1e-7;
pub const MAX_STEPS: usize = 16;

/// Each step optimizes over `[max(l, CUSHION·u), u]`. Very small `l` would
/// otherwise produce a polynomial so steep that rounding in the matrix
/// iteration pushes the tail of the spectrum out of range.
const CUSHION: f64 = 0.02;

pub fn compose(ell: f64, steps: usize) -> Result<CoefficientSchedule> {
    if !(MIN_ELL..1.0).contains(&ell) {
        return Err(Error::Config(format!("ell {ell} outside [{MIN_ELL}, 1)")));
    }
    if !(1..=MAX_STEPS).contains(&steps) {
        return Err(Error::Config(format!("step count {steps} outside [1, {MAX_STEPS}]")));
    }
    let mut lo = ell;
    let mut hi = 1.0;
    let mut triplets = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = optimal_quintic(lo.max(CUSHION * hi), hi)?;
        let recenter = 2.0 / (t.eval(lo) + t.eval(hi));
        let s = if k + 1 < steps { SAFETY_SCALE } else { 1.0 };
        let step = CoefficientTriplet::new(
            t.a * recenter / s,
            t.b * recenter / s.powi(3),
            t.c * recenter / s.powi(5),
        );
        if !step.is_finite() {
            return Err(Error::Numerical(format!("non-finite coefficients at step {}", k + 1)));
        }
        lo = step.eval(lo);
        hi = 2.0 - lo;
        triplets.push(step);
    }
    CoefficientSchedule::new(triplets, Some(ell))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_arguments() {
        assert!(matches!(compose(0.0, 5), Err(Error::Config(_))));
        assert!(matches!(compose(1.0, 5), Err(Error::Config(_))));
        assert!(matches!(compose(1e-3, 0), Err(Error::Config(_))));
        assert!(matches!(compose(1e-3, 17), Err(Error::Config(_))));
        assert!(compose(MIN_ELL, MAX_STEPS).is_ok());
    }

    #[test]
    fn is_deterministic() {
        let a = compose(3.7e-4, 6).unwrap();
        let b = compose(3.7e-4, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.declared_ell, Some(3.7e-4));
    }

    #[test]
    fn first_steps_match_published_rows() {
        // attn_k and mlp_down of the smallest published model.
        let cases = [
            (3.02222e-4, 6, [8.2612, -23.225, 16.729]),
            (5.879e-3, 4, [8.0715, -22.692, 16.345]),
        ];
        for (ell, k, want) in cases {
            let t = compose(ell, k).unwrap().triplets[0];
            for (got, want) in [t.a, t.b, t.c].into_iter().zip(want) {
                assert!(((got - want) / want).abs() < 0.02, "ell={ell}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn single_step_near_one_is_almost_exact() {
        let s = compose(0.999, 1).unwrap();
        let t = s.triplets[0];
        let worst = (0..=1000)
            .map(|i| 0.999 + 0.001 * i as f64 / 1000.0)
            .map(|x| (t.eval(x) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "{worst}");

        // Grid search around the flat quintic finds nothing meaningfully better.
        let mut best = f64::INFINITY;
        for i in -20..=20 {
            for j in -20..=20 {
                let a = 1.875 + i as f64 * 2e-4;
                let b = -1.25 + j as f64 * 4e-4;
                // Pin c so p(1) = 1.
                let cand = CoefficientTriplet::new(a, b, 1.0 - a - b);
                let dev = (0..=200)
                    .map(|m| 0.999 + 0.001 * m as f64 / 200.0)
                    .map(|x| (cand.eval(x) - 1.0).abs())
                    .fold(0.0, f64::max);
                best = best.min(dev);
            }
        }
        assert!(worst <= best + 1e-9, "{worst} vs grid {best}");
    }
}
