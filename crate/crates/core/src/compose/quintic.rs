//! Minimax odd quintic approximating 1 on an interval.
//!
//! The optimum equioscillates at four points `l < q < r < u` with alternating
//! sign, `p(l) = 1 − E, p(q) = 1 + E, p(r) = 1 − E, p(u) = 1 + E`, where `q`
//! and `r` are the interior critical points of `p`. Exchange iteration: solve
//! the 4x4 system for `(a, b, c, E)` on the current nodes, move `q, r` to the
//! new critical points, repeat until `E` stops moving.

use crate::error::{Error, Result};
use crate::ns::CoefficientTriplet;

/// Above this `l/u` ratio the optimum is numerically the Taylor-flat quintic
/// `(15x − 10x³ + 3x⁵)/8` and the exchange system is too ill-conditioned.
const FLAT_RATIO: f64 = 1.0 - 1e-4;
const MAX_EXCHANGES: usize = 100;

pub fn optimal_quintic(l: f64, u: f64) -> Result<CoefficientTriplet> {
    if !(l > 0.0 && l <= u && u.is_finite()) {
        return Err(Error::Precondition(format!("invalid interval [{l}, {u}]")));
    }
    let rho = l / u;
    let (a, b, c) = if rho >= FLAT_RATIO {
        (15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0)
    } else {
        unit_interval_quintic(rho)?
    };
    // p(x) on [l, u] is p̂(x/u) on [ρ, 1].
    Ok(CoefficientTriplet::new(a / u, b / u.powi(3), c / u.powi(5)))
}

fn unit_interval_quintic(rho: f64) -> Result<(f64, f64, f64)> {
    let mut q = (3.0 * rho + 1.0) / 4.0;
    let mut r = (rho + 3.0) / 4.0;
    let mut err = f64::INFINITY;
    for _ in 0..MAX_EXCHANGES {
        let nodes = [(rho, 1.0), (q, -1.0), (r, 1.0), (1.0, -1.0)];
        let mut sys = [[0.0; 5]; 4];
        for (row, &(x, sign)) in sys.iter_mut().zip(&nodes) {
            let x2 = x * x;
            *row = [x, x * x2, x * x2 * x2, sign, 1.0];
        }
        let [a, b, c, e] = solve4(sys).ok_or_else(|| {
            Error::Numerical(format!("singular exchange system at ratio {rho}"))
        })?;
        let disc = 9.0 * b * b - 20.0 * a * c;
        if !(disc >= 0.0) || c == 0.0 {
            return Err(Error::Numerical(format!(
                "no interior critical points at ratio {rho}"
            )));
        }
        let root = disc.sqrt();
        let lo2 = (-3.0 * b - root) / (10.0 * c);
        let hi2 = (-3.0 * b + root) / (10.0 * c);
        let (lo2, hi2) = if lo2 <= hi2 { (lo2, hi2) } else { (hi2, lo2) };
        if !(lo2 > 0.0) {
            return Err(Error::Numerical(format!("critical point left the interval at ratio {rho}")));
        }
        q = lo2.sqrt();
        r = hi2.sqrt();
        let settled = (err - e).abs() <= 1e-15;
        err = e;
        if settled {
            return Ok((a, b, c));
        }
    }
    Err(Error::Numerical(format!(
        "exchange iteration did not settle at ratio {rho}"
    )))
}

/// Gaussian elimination with partial pivoting on an augmented 4x5 system.
fn solve4(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col] == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][4] - tail) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
