use serde::Serialize;

use crate::error::{Error, Result};
use crate::ns::{CoefficientSchedule, CoefficientTriplet};

/// Interval bounds on the normalized spectrum before and after every step.
/// `intervals[0]` is the starting interval `(ell, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarTrajectory {
    pub intervals: Vec<(f64, f64)>,
}

impl ScalarTrajectory {
    pub fn final_interval(&self) -> (f64, f64) {
        *self.intervals.last().expect("trajectory always holds the start")
    }

    pub fn final_lower(&self) -> f64 {
        self.final_interval().0
    }

    pub fn steps(&self) -> usize {
        self.intervals.len() - 1
    }
}

/// Exact `(min, max)` of `p` over `[lo, hi]`: endpoints plus the critical
/// points `p'(x) = 0`, which solve a quadratic in `x²`.
pub fn interval_image(t: &CoefficientTriplet, lo: f64, hi: f64) -> (f64, f64) {
    let mut min = t.eval(lo).min(t.eval(hi));
    let mut max = t.eval(lo).max(t.eval(hi));
    for y in critical_squares(t) {
        let x = y.sqrt();
        if x > lo && x < hi {
            let v = t.eval(x);
            min = min.min(v);
            max = max.max(v);
        }
    }
    (min, max)
}

/// Positive roots `y = x²` of `5c·y² + 3b·y + a = 0`.
fn critical_squares(t: &CoefficientTriplet) -> Vec<f64> {
    let (qa, qb, qc) = (5.0 * t.c, 3.0 * t.b, t.a);
    let mut roots = Vec::with_capacity(2);
    if qa == 0.0 {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            // Numerically stable pair.
            let q = -0.5 * (qb + qb.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / qa);
                roots.push(qc / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots.retain(|&y| y > 0.0 && y.is_finite());
    roots
}

pub fn simulate(ell: f64, schedule: &CoefficientSchedule) -> Result<ScalarTrajectory> {
    if !(ell > 0.0 && ell < 1.0) {
        return Err(Error::Config(format!("ell {ell} outside (0, 1)")));
    }
    let mut intervals = Vec::with_capacity(schedule.steps() + 1);
    let mut cur = (ell, 1.0);
    intervals.push(cur);
    for (k, t) in schedule.triplets.iter().enumerate() {
        cur = interval_image(t, cur.0, cur.1);
        if !(cur.0.is_finite() && cur.1.is_finite()) {
            return Err(Error::Numerical(format!("trajectory diverged at step {}", k + 1)));
        }
        intervals.push(cur);
    }
    Ok(ScalarTrajectory { intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::compose;

    fn grid_image(t: &CoefficientTriplet, lo: f64, hi: f64) -> (f64, f64) {
        (0..=20_000)
            .map(|i| t.eval(lo + (hi - lo) * i as f64 / 20_000.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }

    #[test]
    fn empty_schedule_is_identity() {
        let tr = simulate(0.3, &CoefficientSchedule::empty()).unwrap();
        assert_eq!(tr.intervals, vec![(0.3, 1.0)]);
        assert_eq!(tr.steps(), 0);
    }

    #[test]
    fn image_matches_dense_grid() {
        let kj = CoefficientTriplet::new(3.4445, -4.775, 2.0315);
        for (lo, hi) in [(0.01, 1.0), (0.3, 0.9), (0.6, 1.2), (0.05, 0.2)] {
            let (a, b) = interval_image(&kj, lo, hi);
            let (ga, gb) = grid_image(&kj, lo, hi);
            assert!(a <= ga + 1e-12 && (a - ga).abs() < 1e-6);
            assert!(b >= gb - 1e-12 && (b - gb).abs() < 1e-6);
        }
    }

    #[test]
    fn composed_schedule_lands_near_one() {
        let s = compose(1e-3, 7).unwrap();
        let (lo, hi) = simulate(1e-3, &s).unwrap().final_interval();
        assert!(lo > 0.999 && hi < 1.001, "({lo}, {hi})");
    }

    #[test]
    fn rejects_bad_ell() {
        assert!(simulate(0.0, &CoefficientSchedule::empty()).is_err());
        assert!(simulate(1.0, &CoefficientSchedule::empty()).is_err());
    }
}
