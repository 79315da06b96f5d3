mod common;

use amo_core::compose::{compose, simulate};
use amo_core::linalg::singular_values;
use amo_core::ns::{CoefficientSchedule, SAFETY_SCALE};
use amo_core::optimizer::{AdamState, AdamW, Muon, MuonState};
use amo_core::Matrix;
use common::gaussian;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook AdamW written out element by element, with explicit bias
/// corrections and the decay folded into the same update.
fn reference_adamw(p: &mut [f64], grads: &[Vec<f64>], lr: f64, b1: f64, b2: f64, eps: f64, wd: f64) {
    let mut m = vec![0.0; p.len()];
    let mut v = vec![0.0; p.len()];
    for (t, g) in grads.iter().enumerate() {
        let t = (t + 1) as f64;
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1.powf(t));
            let v_hat = v[i] / (1.0 - b2.powf(t));
            p[i] = p[i] - lr * wd * p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[test]
fn adamw_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grads: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let init: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

    let opt = AdamW::default();
    let mut ours = init.clone();
    let mut st = AdamState::new(4);
    for g in &grads {
        opt.step(&mut ours, g, &mut st, 3e-3).unwrap();
    }
    let mut theirs = init;
    reference_adamw(&mut theirs, &grads, 3e-3, 0.9, 0.95, 1e-8, 0.1);
    for (a, b) in ours.iter().zip(&theirs) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn muon_update_has_a_flat_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let muon = Muon { weight_decay: 0.0, ..Muon::default() };
    let grad = gaussian(&mut rng, 16, 48);
    let before = gaussian(&mut rng, 16, 48);
    let mut param = before.clone();
    let mut st = MuonState::new(16, 48);
    let sched = compose(1e-3, 5).unwrap();
    let lr = 0.01;
    muon.step(&mut param, &grad, &mut st, &sched, SAFETY_SCALE, lr).unwrap();

    let (lo, hi) = simulate(1e-3, &sched).unwrap().final_interval();
    let unit = lr * 0.2 * 48f64.sqrt();
    let delta = before.sub(&param).unwrap();
    for s in singular_values(&delta).unwrap() {
        assert!(s >= (lo - 1e-6) * unit && s <= (hi + 1e-6) * unit, "{}", s / unit);
    }
    // Frobenius bound with all singular values at most the simulated ceiling.
    assert!(delta.frobenius_norm() <= unit * 16f64.sqrt() * (hi + 1e-6));
}

#[test]
fn momentum_matches_scalar_recursion_on_rank_one_gradients() {
    let muon = Muon { weight_decay: 0.0, ..Muon::default() };
    let u = Matrix::from_fn(3, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.0));
    let coeffs = [1.0, -0.5, 2.0, 0.25, 3.0];
    let mut param = Matrix::zeros(3, 5);
    let mut st = MuonState::new(3, 5);
    let (mut b, mu) = (0.0, 0.95);
    for &c in &coeffs {
        let out = muon.step(&mut param, &u.scale(c), &mut st, &CoefficientSchedule::empty(), 1.0, 0.0).unwrap();
        b = mu * b + c;
        let m = c + mu * b;
        assert!(out.ns_input.max_abs_diff(&u.scale(m)) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn direction_ignores_gradient_scale(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian(&mut rng, 6, 10);
        let muon = Muon { momentum: 0.0, ..Muon::default() };
        let sched = compose(1e-2, 5).unwrap();
        let mut p = Matrix::zeros(6, 10);
        let a = muon.step(&mut p, &g, &mut MuonState::new(6, 10), &sched, SAFETY_SCALE, 0.0).unwrap();
        let b = muon.step(&mut p, &g.scale(c), &mut MuonState::new(6, 10), &sched, SAFETY_SCALE, 0.0).unwrap();
        prop_assert!(a.direction.max_abs_diff(&b.direction) < 1e-8);
    }
}
