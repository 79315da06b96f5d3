//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Rotations are applied to the columns of the tall orientation of the input,
//! so the work happens on the smaller Gram side. Convergence is declared when a
//! full sweep finds every column pair orthogonal to within `TOL` relative to
//! the pair's norms.

use super::Matrix;
use crate::error::{Error, Result};

const TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `M = U·diag(S)·Vᵀ`.
///
/// For an `m x n` input with `k = min(m, n)`, `u` is `m x k`, `v` is `n x k`
/// and `s` holds `k` values in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.s.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul_t(&self.v).expect("svd factors are conformable")
    }
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::Numerical(format!(
            "svd input {}x{} has non-finite entries",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose())?;
        Ok(Svd { u: t.v, s: t.s, v: t.u })
    }
}

/// Singular values only, in non-increasing order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.s)
}

fn jacobi_tall(a: &Matrix) -> Result<Svd> {
    let (rows, n) = a.shape();
    // Column-major working copies so every rotation touches contiguous memory.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns below this squared norm are numerical zeros; rotating them
    // against each other only shuffles rounding noise.
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for k in 0..rows {
                        alpha += wp[k] * wp[k];
                        beta += wq[k] * wq[k];
                        gamma += wp[k] * wq[k];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= TOL * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            rows: a.rows(),
            cols: a.cols(),
        });
    }

    let norms: Vec<f64> = w.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let null_cut = sigma_max * (rows as f64) * f64::EPSILON;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if s[slot] > null_cut && s[slot] > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / s[slot]).collect());
        } else {
            u_cols.push(vec![0.0; rows]);
            pending.push(slot);
        }
    }
    // One modified Gram-Schmidt pass tightens orthogonality of columns that
    // belong to small singular values.
    for j in 0..n {
        if pending.contains(&j) {
            continue;
        }
        for i in 0..j {
            if pending.contains(&i) {
                continue;
            }
            let d = dot(&u_cols[i], &u_cols[j]);
            let (head, tail) = u_cols.split_at_mut(j);
            axpy(&mut tail[0], -d, &head[i]);
        }
        normalize(&mut u_cols[j]);
    }
    complete_basis(&mut u_cols, &pending, rows);

    let u = columns_to_matrix(&u_cols, rows);
    let v_sorted: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    let v = columns_to_matrix(&v_sorted, n);
    Ok(Svd { u, s, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        *x = c * xp - s * *y;
        *y = s * xp + c * *y;
    }
}

/// Fills the columns listed in `pending` with unit vectors orthogonal to
/// every other column, taking the coordinate axis with the largest residual
/// each time.
fn complete_basis(cols: &mut [Vec<f64>], pending: &[usize], len: usize) {
    for &slot in pending {
        let mut best: Option<Vec<f64>> = None;
        let mut best_norm = 0.0;
        for candidate in 0..len {
            let mut e = vec![0.0; len];
            e[candidate] = 1.0;
            for _ in 0..2 {
                for (i, c) in cols.iter().enumerate() {
                    if i != slot {
                        let d = dot(c, &e);
                        axpy(&mut e, -d, c);
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > best_norm {
                best_norm = norm;
                best = Some(e);
            }
        }
        let mut e = best.expect("the columns do not span the whole space");
        normalize(&mut e);
        cols[slot] = e;
    }
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> Matrix {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormality_error(q: &Matrix) -> f64 {
        q.t_matmul(q)
            .unwrap()
            .sub(&Matrix::identity(q.cols()))
            .unwrap()
            .frobenius_norm()
    }

    #[test]
    fn diagonal_input() {
        let d = Matrix::from_diag(2, 2, &[3.0, 1.0]);
        let f = svd(&d).unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-15 && (f.s[1] - 1.0).abs() < 1e-15);

        let d = Matrix::from_diag(3, 3, &[1.0, 5.0, 2.0]);
        assert_eq!(svd(&d).unwrap().s, vec![5.0, 2.0, 1.0]);
    }

    #[test]
    fn rotation_is_an_isometry() {
        let (c, s) = (0.6f64, 0.8f64);
        let q = Matrix::new(2, 2, vec![c, -s, s, c]).unwrap();
        for sv in svd(&q).unwrap().s {
            assert!((sv - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_has_orthonormal_factors() {
        // Rank one: outer product.
        let m = Matrix::from_fn(5, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let f = svd(&m).unwrap();
        assert!(f.s[1] < 1e-12 && f.s[2] < 1e-12);
        assert!(orthonormality_error(&f.u) < 1e-12);
        assert!(orthonormality_error(&f.v) < 1e-12);
        assert!(f.reconstruct().sub(&m).unwrap().frobenius_norm() < 1e-12 * m.frobenius_norm());
    }

    #[test]
    fn square_low_rank_completes_the_basis() {
        // Null space directions spread over every axis, none dominant.
        let n = 16;
        let m = Matrix::from_fn(n, n, |i, j| 1.0 + ((i * j) % 3) as f64);
        let f = svd(&m).unwrap();
        assert!(f.s[3] < 1e-10);
        assert!(orthonormality_error(&f.u) < 1e-12);
        assert!(orthonormality_error(&f.v) < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let z = Matrix::zeros(3, 4);
        let f = svd(&z).unwrap();
        assert_eq!(f.s, vec![0.0; 3]);
        assert!(orthonormality_error(&f.u) < 1e-14);
        assert!(orthonormality_error(&f.v) < 1e-14);
    }

    #[test]
    fn wide_input_uses_transpose() {
        let m = Matrix::from_fn(2, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let f = svd(&m).unwrap();
        assert_eq!(f.u.shape(), (2, 2));
        assert_eq!(f.v.shape(), (6, 2));
        assert!(f.reconstruct().max_abs_diff(&m) < 1e-13);
    }
}
