mod common;

use amo_core::linalg::{ns_residual, singular_values, spectral_stats, stats_from_spectrum, svd};
use amo_core::Matrix;
use common::{gaussian, oracle_singular_values, orthogonal, with_spectrum};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn orthonormal_columns_error(m: &Matrix) -> f64 {
    m.t_matmul(m).unwrap().max_abs_diff(&Matrix::identity(m.cols()))
}

#[test]
fn singular_values_agree_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = gaussian(&mut rng, 8, 5);
    let ours = singular_values(&m).unwrap();
    let theirs = oracle_singular_values(&m);
    for (a, b) in ours.iter().zip(&theirs) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn reconstruction_on_random_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let (r, c) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let m = gaussian(&mut rng, r, c);
        let f = svd(&m).unwrap();
        let rel = f.reconstruct().sub(&m).unwrap().frobenius_norm() / m.frobenius_norm();
        assert!(rel < 1e-10, "{r}x{c}: {rel}");
        assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(orthonormal_columns_error(&f.u) < 1e-10);
        assert!(orthonormal_columns_error(&f.v) < 1e-10);
    }
}

#[test]
fn stats_match_prescribed_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sigmas: Vec<f64> = (0..16).map(|i| 0.5f64.powi(i)).collect();
    let m = with_spectrum(&mut rng, 16, 16, &sigmas);
    let got = spectral_stats(&m, 1e-10, 0.99).unwrap();

    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    let rank = sigmas.iter().position(|s| {
        acc += s * s;
        acc >= 0.99 * total
    });
    let entropy: f64 = sigmas.iter().map(|s| s * s / total).map(|p| -p * p.ln()).sum();
    let smallest = sigmas[15];
    assert!((got.sigma_max - 1.0).abs() < 1e-10);
    assert!((got.sigma_min_trunc / smallest - 1.0).abs() < 1e-6);
    assert!((got.kappa / (1.0 / smallest) - 1.0).abs() < 1e-6);
    assert!((got.ell / (smallest / total.sqrt()) - 1.0).abs() < 1e-6);
    assert!((got.frobenius - total.sqrt()).abs() < 1e-10);
    assert_eq!(got.effective_rank, rank.unwrap() + 1);
    assert!((got.spectral_entropy - entropy).abs() < 1e-10);

    let direct = stats_from_spectrum(&sigmas, total.sqrt(), 1e-10, 0.99);
    assert_eq!(direct.effective_rank, got.effective_rank);
}

#[test]
fn ell_stays_at_most_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let s = spectral_stats(&gaussian(&mut rng, r, c), 1e-10, 0.99).unwrap();
        assert!(s.ell <= 1.0 && s.ell > 0.0 && s.kappa >= 1.0);
        assert!(s.effective_rank <= r.min(c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kappa_ignores_scaling(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian(&mut rng, 6, 9);
        let a = spectral_stats(&m, 1e-10, 0.99).unwrap();
        let b = spectral_stats(&m.scale(c), 1e-10, 0.99).unwrap();
        prop_assert!((a.kappa - b.kappa).abs() < 1e-9 * a.kappa);
    }

    #[test]
    fn residual_ignores_orthogonal_factors(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian(&mut rng, 5, 7);
        let q1 = orthogonal(&mut rng, 5);
        let q2 = orthogonal(&mut rng, 7);
        let rotated = q1.matmul(&m).unwrap().matmul(&q2).unwrap();
        let (e1, _) = ns_residual(&m);
        let (e2, _) = ns_residual(&rotated);
        prop_assert!((e1 - e2).abs() < 1e-9 * e1.max(1.0));
    }
}
