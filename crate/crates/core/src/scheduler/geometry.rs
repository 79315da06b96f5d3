use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{ns_residual, spectral_stats, Matrix};
use crate::ns::{apply_ns, CoefficientSchedule};
use crate::op::OperatorType;

/// Singular values at or below this are treated as numerical zeros.
pub const SIGMA_FLOOR: f64 = 1e-10;
/// Energy fraction defining effective rank.
pub const RANK_ENERGY: f64 = 0.99;

/// Geometry of one NS input matrix at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySnapshot {
    pub step: usize,
    pub op_type: OperatorType,
    pub layer: usize,
    /// `ℓ(M) / safety_scale`: the lower bound NS actually sees.
    pub ell_eff: f64,
    pub kappa: f64,
    /// Shape-normalized residual of the NS output under the active schedule.
    pub eps_norm: f64,
    pub frobenius: f64,
    pub effective_rank: usize,
}

impl GeometrySnapshot {
    pub fn capture(
        step: usize,
        op_type: OperatorType,
        layer: usize,
        input: &Matrix,
        schedule: &CoefficientSchedule,
        safety_scale: f64,
    ) -> Result<Self> {
        let output = apply_ns(input, schedule, safety_scale)?;
        Self::from_output(step, op_type, layer, input, &output, safety_scale)
    }

    /// Snapshot when the NS output is already at hand.
    pub fn from_output(
        step: usize,
        op_type: OperatorType,
        layer: usize,
        input: &Matrix,
        output: &Matrix,
        safety_scale: f64,
    ) -> Result<Self> {
        let stats = spectral_stats(input, SIGMA_FLOOR, RANK_ENERGY)?;
        let (_, eps_norm) = ns_residual(output);
        Ok(Self {
            step,
            op_type,
            layer,
            ell_eff: stats.ell / safety_scale,
            kappa: stats.kappa,
            eps_norm,
            frobenius: stats.frobenius,
            effective_rank: stats.effective_rank,
        })
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Median with the mean of the two middle values for even counts.
/// `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}
