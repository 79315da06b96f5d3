#![allow(dead_code)]

use amo_core::Matrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values from nalgebra, sorted descending.
pub fn oracle_singular_values(m: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Haar-ish random orthogonal matrix from the QR of a Gaussian matrix.
pub fn orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    let q = to_na(&gaussian(rng, n, n)).qr().q();
    from_na(&q)
}

/// `U · diag(sigmas) · Vᵀ` with random orthogonal factors.
pub fn with_spectrum(rng: &mut impl Rng, rows: usize, cols: usize, sigmas: &[f64]) -> Matrix {
    let u = orthogonal(rng, rows);
    let v = orthogonal(rng, cols);
    u.matmul(&Matrix::from_diag(rows, cols, sigmas)).unwrap().matmul_t(&v).unwrap()
}
