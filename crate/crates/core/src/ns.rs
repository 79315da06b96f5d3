//! Quintic Newton–Schulz orthogonalization.
//!
//! One step maps `X ← a·X + b·(X·Xᵀ)·X + c·(X·Xᵀ)²·X`. On singular values this
//! is the odd scalar polynomial `p(σ) = a·σ + b·σ³ + c·σ⁵`, so a schedule of
//! `T` triplets acts on the spectrum as the composition `p_T ∘ … ∘ p_1`.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default pre-iteration safety scale for composed (PE/AMO) schedules.
pub const SAFETY_SCALE: f64 = 1.01;

/// Coefficients of one quintic step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTriplet {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CoefficientTriplet {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// The scalar map this step applies to each singular value.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        x * (self.a + x2 * (self.b + self.c * x2))
    }

    /// `p'(x) = a + 3b·x² + 5c·x⁴`.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.a + x2 * (3.0 * self.b + 5.0 * self.c * x2)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }
}

impl fmt::Display for CoefficientTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.5}, {:.5}, {:.5})", self.a, self.b, self.c)
    }
}

/// An ordered NS run. `declared_ell` is the input lower bound the schedule was
/// composed for; fixed baseline tables carry none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSchedule {
    pub triplets: Vec<CoefficientTriplet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_ell: Option<f64>,
}

impl CoefficientSchedule {
    pub fn new(triplets: Vec<CoefficientTriplet>, declared_ell: Option<f64>) -> Result<Self> {
        if let Some(k) = triplets.iter().position(|t| !t.is_finite()) {
            return Err(Error::Config(format!("triplet {k} is not finite")));
        }
        if let Some(ell) = declared_ell {
            if !(ell > 0.0 && ell <= 1.0) {
                return Err(Error::Config(format!("declared ell {ell} outside (0, 1]")));
            }
        }
        Ok(Self { triplets, declared_ell })
    }

    /// Zero-step schedule: normalization only.
    pub fn empty() -> Self {
        Self { triplets: Vec::new(), declared_ell: None }
    }

    /// `triplet` repeated `steps` times, as in fixed-coefficient Muon.
    pub fn repeated(triplet: CoefficientTriplet, steps: usize) -> Self {
        Self { triplets: vec![triplet; steps], declared_ell: None }
    }

    pub fn steps(&self) -> usize {
        self.triplets.len()
    }

    /// The composed scalar polynomial applied to a normalized singular value.
    pub fn eval_scalar(&self, x: f64) -> f64 {
        self.triplets.iter().fold(x, |acc, t| t.eval(acc))
    }

    /// Same schedule with the step count replaced, reusing the first triplet
    /// pattern. Only meaningful for fixed single-triplet tables.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        match self.triplets.first() {
            Some(&t) if self.triplets.iter().all(|x| *x == t) => Ok(Self::repeated(t, steps)),
            Some(_) => Err(Error::Config(
                "step override needs a single repeated triplet".into(),
            )),
            None => Ok(Self::empty()),
        }
    }
}

/// Identifiers of the shipped fixed baseline tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinSchedule {
    /// Single triplet repeated five times, from the reference Muon code.
    Kj5,
    /// Five distinct per-step triplets from the You listing.
    You5,
}

impl BuiltinSchedule {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinSchedule::Kj5 => "KJ-5",
            BuiltinSchedule::You5 => "You-5",
        }
    }

    fn source(self) -> &'static str {
        match self {
            BuiltinSchedule::Kj5 => include_str!("../fixtures/kj5.json"),
            BuiltinSchedule::You5 => include_str!("../fixtures/you5.json"),
        }
    }
}

impl std::str::FromStr for BuiltinSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "KJ-5" | "kj-5" | "kj" => Ok(BuiltinSchedule::Kj5),
            "You-5" | "you-5" | "you" => Ok(BuiltinSchedule::You5),
            other => Err(Error::Config(format!("unknown schedule name {other:?}"))),
        }
    }
}

/// On-disk form of a pinned coefficient table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleFixture {
    pub name: String,
    pub provenance: String,
    /// `sha256:<hex>` over the compact JSON encoding of `triplets`.
    pub checksum: String,
    pub triplets: Vec<CoefficientTriplet>,
}

impl ScheduleFixture {
    pub fn parse(json: &str) -> Result<Self> {
        let fx: ScheduleFixture = serde_json::from_str(json)?;
        let expected = triplet_checksum(&fx.triplets)?;
        if fx.checksum != expected {
            return Err(Error::Config(format!(
                "fixture {} checksum mismatch: file says {}, content hashes to {}",
                fx.name, fx.checksum, expected
            )));
        }
        Ok(fx)
    }
}

pub fn triplet_checksum(triplets: &[CoefficientTriplet]) -> Result<String> {
    let canonical = serde_json::to_string(triplets)?;
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(format!("sha256:{hex}"))
}

/// Loads a named baseline table from its pinned fixture.
pub fn builtin_schedule(name: &str) -> Result<CoefficientSchedule> {
    let id: BuiltinSchedule = name.parse()?;
    let fx = ScheduleFixture::parse(id.source())?;
    CoefficientSchedule::new(fx.triplets, None)
}

/// Runs `schedule` on `m`.
///
/// The iterate is kept wide (the input is transposed when it has more rows
/// than columns) and starts at `M / (‖M‖_F · safety_scale)`.
pub fn apply_ns(m: &Matrix, schedule: &CoefficientSchedule, safety_scale: f64) -> Result<Matrix> {
    if !(safety_scale >= 1.0) {
        return Err(Error::Config(format!("safety scale must be >= 1, got {safety_scale}")));
    }
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("Newton-Schulz input is the zero matrix".into()));
    }
    if !norm.is_finite() {
        return Err(Error::NumericalBlowUp { step: 0 });
    }
    let transposed = m.rows() > m.cols();
    let mut x = if transposed { m.transpose() } else { m.clone() };
    x.scale_mut(1.0 / (norm * safety_scale));

    for (k, t) in schedule.triplets.iter().enumerate() {
        let gram = x.matmul_t(&x)?;
        // b·A + c·A²
        let mut poly = gram.matmul(&gram)?;
        poly.scale_mut(t.c);
        poly.axpy(t.b, &gram)?;
        let mut next = poly.matmul(&x)?;
        next.axpy(t.a, &x)?;
        if !next.is_finite() {
            return Err(Error::NumericalBlowUp { step: k + 1 });
        }
        x = next;
    }
    Ok(if transposed { x.transpose() } else { x })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_load() {
        let kj = builtin_schedule("KJ-5").unwrap();
        assert_eq!(kj.steps(), 5);
        assert!(kj.triplets.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(kj.triplets[0], CoefficientTriplet::new(3.4445, -4.7750, 2.0315));

        let you = builtin_schedule("You-5").unwrap();
        assert_eq!(you.steps(), 5);
        assert!(you.triplets.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(builtin_schedule("FooBar"), Err(Error::Config(_))));
    }

    #[test]
    fn tampered_fixture_is_rejected() {
        let src = BuiltinSchedule::Kj5.source().replacen("\"a\": 3.4445", "\"a\": 3.4446", 1);
        assert!(matches!(ScheduleFixture::parse(&src), Err(Error::Config(_))));
    }

    #[test]
    fn empty_schedule_only_normalizes() {
        let m = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        let out = apply_ns(&m, &CoefficientSchedule::empty(), 1.01).unwrap();
        let expected = m.scale(1.0 / (1.01 * m.frobenius_norm()));
        assert_eq!(out.shape(), (3, 2));
        assert!(out.max_abs_diff(&expected) < 1e-16);
    }

    #[test]
    fn zero_input_is_degenerate() {
        let kj = builtin_schedule("KJ-5").unwrap();
        assert!(matches!(
            apply_ns(&Matrix::zeros(2, 3), &kj, 1.0),
            Err(Error::Degenerate(_))
        ));
        assert!(apply_ns(&Matrix::identity(2), &kj, 0.5).is_err());
    }

    #[test]
    fn blow_up_reports_step() {
        let wild = CoefficientSchedule::repeated(CoefficientTriplet::new(1e80, 1e80, 1e80), 4);
        match apply_ns(&Matrix::identity(3), &wild, 1.0) {
            Err(Error::NumericalBlowUp { step }) => assert!(step >= 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn equal_spectrum_stays_equal() {
        // 2·Q for a rotation Q: all singular values equal.
        let (c, s) = (0.28f64, 0.96f64);
        let q = Matrix::new(2, 2, vec![2.0 * c, -2.0 * s, 2.0 * s, 2.0 * c]).unwrap();
        let out = apply_ns(&q, &builtin_schedule("KJ-5").unwrap(), 1.0).unwrap();
        let sv = crate::linalg::singular_values(&out).unwrap();
        assert!((sv[0] - sv[1]).abs() < 1e-12);
    }
}
