use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ns::{apply_ns, CoefficientSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Muon {
    pub momentum: f64,
    pub weight_decay: f64,
    pub nesterov: bool,
    /// Multiplier on `√max(m, n)` that matches the update RMS to AdamW's.
    pub shape_scale: f64,
}

impl Default for Muon {
    fn default() -> Self {
        Self { momentum: 0.95, weight_decay: 0.1, nesterov: true, shape_scale: 0.2 }
    }
}

/// Momentum buffer for one matrix parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MuonState {
    pub buffer: Matrix,
}

impl MuonState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { buffer: Matrix::zeros(rows, cols) }
    }
}

/// What one step fed to and got from NS.
#[derive(Debug, Clone)]
pub struct MuonStep {
    /// NS input after momentum.
    pub ns_input: Matrix,
    /// Orthogonalized direction, zero when the input was degenerate.
    pub direction: Matrix,
}

impl Muon {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight decay {} is negative", self.weight_decay)));
        }
        Ok(())
    }

    /// One update of `param` in place.
    pub fn step(
        &self,
        param: &mut Matrix,
        grad: &Matrix,
        state: &mut MuonState,
        schedule: &CoefficientSchedule,
        safety_scale: f64,
        lr: f64,
    ) -> Result<MuonStep> {
        if param.shape() != grad.shape() || param.shape() != state.buffer.shape() {
            return Err(Error::Shape(format!(
                "param {:?}, grad {:?}, buffer {:?}",
                param.shape(),
                grad.shape(),
                state.buffer.shape()
            )));
        }
        state.buffer.scale_mut(self.momentum);
        state.buffer.axpy(1.0, grad)?;
        let ns_input = if self.nesterov {
            let mut m = grad.clone();
            m.axpy(self.momentum, &state.buffer)?;
            m
        } else {
            state.buffer.clone()
        };

        let direction = if ns_input.frobenius_norm() == 0.0 {
            log::warn!("zero Muon input for a {:?} parameter; skipping its update", param.shape());
            Matrix::zeros(param.rows(), param.cols())
        } else {
            apply_ns(&ns_input, schedule, safety_scale)?
        };

        let (m, n) = param.shape();
        param.scale_mut(1.0 - lr * self.weight_decay);
        param.axpy(-lr * self.shape_scale * (m.max(n) as f64).sqrt(), &direction)?;
        Ok(MuonStep { ns_input, direction })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_only_step() {
        let muon = Muon { momentum: 0.0, weight_decay: 0.0, ..Muon::default() };
        let q = Matrix::identity(3);
        let mut p = Matrix::zeros(3, 3);
        let mut st = MuonState::new(3, 3);
        muon.step(&mut p, &q, &mut st, &CoefficientSchedule::empty(), 1.0, 0.5).unwrap();
        let expected = q.scale(-0.5 * 0.2 * 3f64.sqrt() / 3f64.sqrt());
        assert!(p.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn nesterov_recursion() {
        let muon = Muon { weight_decay: 0.0, ..Muon::default() };
        let g = Matrix::from_fn(2, 3, |i, j| (i + j) as f64 + 1.0);
        let mut p = Matrix::zeros(2, 3);
        let mut st = MuonState::new(2, 3);
        let s = CoefficientSchedule::empty();
        muon.step(&mut p, &g, &mut st, &s, 1.0, 0.0).unwrap();
        let second = muon.step(&mut p, &g, &mut st, &s, 1.0, 0.0).unwrap();
        // b1 = g, b2 = 0.95 g + g, m2 = g + 0.95 b2
        assert!(second.ns_input.max_abs_diff(&g.scale(2.8525)) < 1e-12);

        let plain = Muon { nesterov: false, ..muon };
        let mut st = MuonState::new(2, 3);
        plain.step(&mut p, &g, &mut st, &s, 1.0, 0.0).unwrap();
        let second = plain.step(&mut p, &g, &mut st, &s, 1.0, 0.0).unwrap();
        assert!(second.ns_input.max_abs_diff(&g.scale(1.95)) < 1e-12);
    }

    #[test]
    fn zero_input_skips_update_but_decays() {
        let muon = Muon::default();
        let mut p = Matrix::identity(2);
        let mut st = MuonState::new(2, 2);
        let out = muon.step(&mut p, &Matrix::zeros(2, 2), &mut st, &CoefficientSchedule::empty(), 1.0, 0.1).unwrap();
        assert_eq!(out.direction, Matrix::zeros(2, 2));
        assert!(p.max_abs_diff(&Matrix::identity(2).scale(0.99)) < 1e-15);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut p = Matrix::zeros(2, 3);
        let mut st = MuonState::new(2, 3);
        let r = Muon::default().step(&mut p, &Matrix::zeros(3, 2), &mut st, &CoefficientSchedule::empty(), 1.0, 0.1);
        assert!(matches!(r, Err(Error::Shape(_))));
        assert!(Muon { momentum: 1.0, ..Muon::default() }.validate().is_err());
    }
}
