//! Integer step counts along the linear path from the uniform schedule to the plan.

use crate::error::{Error, Result};

/// Rounds half away from zero after snapping representation noise.
pub(crate) fn round_half_away(x: f64) -> f64 {
    ((x * 1e9).round() / 1e9).round()
}

/// Per-type step counts at progress `u` of `delta`.
///
/// The real-valued counts `t_base + (u/Δ)·(Tᵢ* − t_base)` are rounded as a
/// whole first, then split by largest remainder (ties to the lower index), so
/// the per-step total follows the interpolated total exactly.
pub fn interpolate_counts(
    t_base: usize,
    targets: &[usize],
    u: usize,
    delta: usize,
    range: (usize, usize),
) -> Result<Vec<usize>> {
    if delta == 0 || u > delta {
        return Err(Error::Phase(format!("transition progress {u} outside [0, {delta}]")));
    }
    let p = u as f64 / delta as f64;
    let real: Vec<f64> = targets
        .iter()
        .map(|&t| t_base as f64 + p * (t as f64 - t_base as f64))
        .collect();
    let total = round_half_away(real.iter().sum()) as usize;

    let mut counts: Vec<usize> = real.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let frac: Vec<f64> = real.iter().zip(&counts).map(|(x, &c)| (x - c as f64).max(0.0)).collect();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&i, &j| frac[j].total_cmp(&frac[i]).then(i.cmp(&j)));

    let (lo, hi) = range;
    for c in counts.iter_mut() {
        *c = (*c).clamp(lo, hi);
    }
    let mut sum: usize = counts.iter().sum();
    let mut cursor = order.iter().cycle();
    let mut guard = 0;
    while sum < total {
        let &i = cursor.next().expect("cycle is endless");
        if counts[i] < hi {
            counts[i] += 1;
            sum += 1;
            guard = 0;
        } else {
            guard += 1;
            if guard > targets.len() {
                return Err(Error::Config(format!("cannot place {total} steps inside {range:?}")));
            }
        }
    }
    let mut cursor = order.iter().rev().cycle();
    while sum > total {
        let &i = cursor.next().expect("cycle is endless");
        if counts[i] > lo {
            counts[i] -= 1;
            sum -= 1;
            guard = 0;
        } else {
            guard += 1;
            if guard > targets.len() {
                return Err(Error::Config(format!("cannot place {total} steps inside {range:?}")));
            }
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        let plan = [5, 6, 6, 5, 4, 5, 4];
        assert_eq!(interpolate_counts(5, &plan, 0, 300, (3, 7)).unwrap(), vec![5; 7]);
        assert_eq!(interpolate_counts(5, &plan, 300, 300, (3, 7)).unwrap(), plan.to_vec());
        assert!(interpolate_counts(5, &plan, 301, 300, (3, 7)).is_err());
    }

    #[test]
    fn largest_remainder_breaks_ties_low() {
        // Real counts 5.5, 5.5, 4.5, 4.5 sum to 20: two types round up, and
        // with all remainders equal the lowest indices win.
        let got = interpolate_counts(5, &[6, 6, 4, 4], 1, 2, (3, 7)).unwrap();
        assert_eq!(got, vec![6, 6, 4, 4]);
        let got = interpolate_counts(5, &[6, 6, 6, 4], 1, 2, (3, 7)).unwrap();
        // 5.5 · 3 + 4.5 = 21
        assert_eq!(got.iter().sum::<usize>(), 21);
        assert_eq!(got, vec![6, 6, 5, 4]);
    }

    #[test]
    fn midpoint_of_a_two_step_move() {
        let got = interpolate_counts(5, &[7, 3], 150, 300, (3, 7)).unwrap();
        assert_eq!(got, vec![6, 4]);
    }

    proptest! {
        #[test]
        fn totals_track_the_interpolation(
            targets in prop::collection::vec(3usize..=7, 7),
            delta in 1usize..400,
        ) {
            let b: usize = targets.iter().sum();
            let mut prev = 35usize;
            for u in 0..=delta {
                let c = interpolate_counts(5, &targets, u, delta, (3, 7)).unwrap();
                let sum: usize = c.iter().sum();
                let real = 35.0 + (u as f64 / delta as f64) * (b as f64 - 35.0);
                prop_assert_eq!(sum as f64, round_half_away(real));
                prop_assert!(c.iter().all(|&k| (3..=7).contains(&k)));
                if b >= 35 { prop_assert!(sum >= prev) } else { prop_assert!(sum <= prev) }
                prev = sum;
            }
            prop_assert_eq!(prev, b);
        }
    }
}
