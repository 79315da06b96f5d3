use serde::{Deserialize, Serialize};

use super::{svd::singular_values, Matrix};
use crate::error::{Error, Result};

/// Spectral summary of one matrix.
///
/// `sigma_min_trunc` is the smallest singular value strictly above the
/// truncation threshold `tau` (or `tau` itself when none is), `kappa` is
/// `sigma_max / sigma_min_trunc` and `ell` is `sigma_min_trunc / ‖M‖_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralStats {
    pub sigma_max: f64,
    pub sigma_min_trunc: f64,
    pub kappa: f64,
    pub ell: f64,
    pub frobenius: f64,
    pub effective_rank: usize,
    pub spectral_entropy: f64,
}

/// Computes [`SpectralStats`] from an exact SVD.
///
/// `energy` is the fraction of `Σσ²` the effective rank has to explain.
/// The spectral entropy is `-Σ pᵢ ln pᵢ` over `pᵢ = σᵢ² / Σσⱼ²`.
pub fn spectral_stats(m: &Matrix, tau: f64, energy: f64) -> Result<SpectralStats> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::Config(format!("energy must lie in (0, 1], got {energy}")));
    }
    let frobenius = m.frobenius_norm();
    if frobenius == 0.0 {
        return Err(Error::Degenerate(format!(
            "all-zero {}x{} matrix has no spectrum",
            m.rows(),
            m.cols()
        )));
    }
    let sigmas = singular_values(m)?;
    Ok(stats_from_spectrum(&sigmas, frobenius, tau, energy))
}

/// Same statistics as [`spectral_stats`] for an already computed,
/// non-increasing spectrum.
pub fn stats_from_spectrum(sigmas: &[f64], frobenius: f64, tau: f64, energy: f64) -> SpectralStats {
    let sigma_max = sigmas.first().copied().unwrap_or(0.0);
    let sigma_min_trunc = sigmas
        .iter()
        .copied()
        .filter(|&s| s > tau)
        .fold(f64::INFINITY, f64::min);
    let sigma_min_trunc = if sigma_min_trunc.is_finite() { sigma_min_trunc } else { tau };

    // When every singular value sits below tau the ratio can dip under one;
    // clamp so the documented ranges hold.
    let kappa = (sigma_max / sigma_min_trunc).max(1.0);
    let ell = (sigma_min_trunc / frobenius).min(1.0);

    let mut cumulative = Vec::with_capacity(sigmas.len());
    let mut acc = 0.0;
    for s in sigmas {
        acc += s * s;
        cumulative.push(acc);
    }
    let total = acc;
    let effective_rank = cumulative
        .iter()
        .position(|&c| c >= energy * total)
        .map(|i| i + 1)
        .unwrap_or(sigmas.len())
        .max(1);

    let spectral_entropy = if total > 0.0 {
        sigmas
            .iter()
            .map(|s| s * s / total)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum::<f64>()
            .max(0.0)
    } else {
        0.0
    };

    SpectralStats {
        sigma_max,
        sigma_min_trunc,
        kappa,
        ell,
        frobenius,
        effective_rank,
        spectral_entropy,
    }
}

/// Orthogonality defect of an NS output on its short side.
///
/// Returns `(‖M·Mᵀ − I‖_F, that / √min(m, n))`, using `Mᵀ·M` for tall inputs.
pub fn ns_residual(mp: &Matrix) -> (f64, f64) {
    let mut gram = mp.short_gram();
    let n = gram.rows();
    for i in 0..n {
        gram[(i, i)] -= 1.0;
    }
    let eps = gram.frobenius_norm();
    (eps, eps / (n as f64).sqrt())
}
