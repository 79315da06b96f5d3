//! Dense matrices, exact SVD and the spectral statistics built on it.

mod matrix;
mod stats;
mod svd;

pub use matrix::Matrix;
pub use stats::{ns_residual, spectral_stats, stats_from_spectrum, SpectralStats};
pub use svd::{singular_values, svd, Svd};
