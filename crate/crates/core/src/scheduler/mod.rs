//! Observe, plan, transition, lock.
//!
//! Training starts on a uniform schedule while the scheduler samples NS inputs
//! and records their per-type lower bound. At the end of the observation
//! window it shrinks those bounds toward a baseline, builds error curves and
//! splits the step budget. It then walks step counts and bounds linearly from
//! the uniform schedule to the plan, and freezes the result.

mod geometry;
mod provider;
mod transition;

pub use geometry::{median, GeometrySnapshot, RANK_ENERGY, SIGMA_FLOOR};
pub use provider::{ScheduleProvider, StaticSchedules};
pub use transition::interpolate_counts;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{allocate, derive_budget, relaxed_range, AllocationPlan};
use crate::compose::{error_curve, quantize_ell, ErrorCurve, ScheduleCache, MIN_ELL};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ns::{CoefficientSchedule, SAFETY_SCALE};
use crate::op::OperatorType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    #[serde(rename = "horizon_T_obs")]
    pub horizon: usize,
    #[serde(rename = "interval_delta_obs")]
    pub interval: usize,
    #[serde(rename = "sample_n_smp")]
    pub samples: usize,
    #[serde(rename = "shrinkage_alpha")]
    pub alpha: f64,
    pub ell_base: f64,
    pub transition_delta: usize,
    #[serde(rename = "budget_ratio_r")]
    pub budget_ratio: f64,
    #[serde(rename = "T_base")]
    pub t_base: usize,
    pub range: (usize, usize),
    pub sampling_seed: u64,
}

impl Default for ObservationConfig {
    /// Settings used for the 0.6B-parameter runs.
    fn default() -> Self {
        Self {
            horizon: 1200,
            interval: 150,
            samples: 8,
            alpha: 0.7,
            ell_base: 1e-3,
            transition_delta: 300,
            budget_ratio: 1.0,
            t_base: 5,
            range: (3, 7),
            sampling_seed: 42,
        }
    }
}

impl ObservationConfig {
    /// Shortened windows for small synthetic runs.
    pub fn toy() -> Self {
        Self { horizon: 200, interval: 25, samples: 2, transition_delta: 50, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.horizon == 0 || self.interval == 0 || self.samples == 0 || self.transition_delta == 0 {
            return bad("observation counts must be positive".into());
        }
        if self.horizon % self.interval != 0 {
            return bad(format!("interval {} does not divide horizon {}", self.interval, self.horizon));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("shrinkage alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.ell_base > 0.0 && self.ell_base < 1.0) {
            return bad(format!("ell_base {} outside (0, 1)", self.ell_base));
        }
        if !(self.budget_ratio > 0.0 && self.budget_ratio.is_finite()) {
            return bad(format!("budget ratio {} must be positive", self.budget_ratio));
        }
        let (lo, hi) = self.range;
        if lo == 0 || lo > hi || hi > crate::compose::MAX_STEPS {
            return bad(format!("invalid step range {:?}", self.range));
        }
        if self.t_base == 0 {
            return bad("T_base must be positive".into());
        }
        Ok(())
    }

    pub fn observation_count(&self) -> usize {
        self.horizon / self.interval
    }

    pub fn is_observation_step(&self, step: usize) -> bool {
        step > 0 && step <= self.horizon && step % self.interval == 0
    }

    /// Phase a given optimizer step falls in (steps are 1-based).
    pub fn phase_at(&self, step: usize) -> Phase {
        if step <= self.horizon {
            Phase::Observing
        } else if step <= self.horizon + self.transition_delta {
            Phase::Transitioning
        } else {
            Phase::Locked
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Observing,
    Transitioning,
    Locked,
}

/// `α·robust + (1 − α)·base`.
pub fn shrink_target(ell_robust: f64, alpha: f64, ell_base: f64) -> f64 {
    alpha * ell_robust + (1.0 - alpha) * ell_base
}

/// Per type, the median of the recorded per-observation medians.
pub fn robust_aggregate(history: &[Vec<f64>]) -> Result<Vec<f64>> {
    history
        .iter()
        .enumerate()
        .map(|(i, h)| {
            median(h).ok_or_else(|| {
                Error::Precondition(format!("no observations for {}", OperatorType::ALL[i]))
            })
        })
        .collect()
}

/// Which `min(samples, layers)` layer indices of `op` are tracked. Fixed per
/// run: the same seed always yields the same subset.
pub fn sampled_layers(seed: u64, op: OperatorType, layers: usize, samples: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(op.index() as u64));
    let mut idx: Vec<usize> = (0..layers).collect();
    idx.shuffle(&mut rng);
    idx.truncate(samples.min(layers));
    idx.sort_unstable();
    idx
}

/// One sampled NS input handed to [`SchedulerState::record_observation`].
#[derive(Debug, Clone, Copy)]
pub struct ObservedMatrix<'a> {
    pub op: OperatorType,
    pub layer: usize,
    pub matrix: &'a Matrix,
}

/// Per-type entry of a transition or locked schedule.
#[derive(Debug, Clone)]
pub struct TypeSchedule {
    pub op: OperatorType,
    pub steps: usize,
    pub ell: f64,
    pub schedule: Arc<CoefficientSchedule>,
}

#[derive(Debug)]
pub struct SchedulerState {
    config: ObservationConfig,
    phase: Phase,
    history: Vec<Vec<f64>>,
    plan: Option<AllocationPlan>,
    curves: Vec<ErrorCurve>,
    transition_u: usize,
    cache: ScheduleCache,
    uniform: Arc<CoefficientSchedule>,
}

impl SchedulerState {
    pub fn new(config: ObservationConfig) -> Result<Self> {
        config.validate()?;
        let cache = ScheduleCache::new();
        let uniform = cache.get_or_compose(config.t_base, config.ell_base)?;
        Ok(Self {
            config,
            phase: Phase::Observing,
            history: vec![Vec::new(); OperatorType::COUNT],
            plan: None,
            curves: Vec::new(),
            transition_u: 0,
            cache,
            uniform,
        })
    }

    pub fn config(&self) -> &ObservationConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn plan(&self) -> Option<&AllocationPlan> {
        self.plan.as_ref()
    }

    /// Error curves built at planning time, in operator order.
    pub fn curves(&self) -> &[ErrorCurve] {
        &self.curves
    }

    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }

    pub fn transition_u(&self) -> usize {
        self.transition_u
    }

    pub fn cache(&self) -> &ScheduleCache {
        &self.cache
    }

    /// Layer indices to sample for `op` given how many layers carry it.
    pub fn sampled_layers(&self, op: OperatorType, layers: usize) -> Vec<usize> {
        sampled_layers(self.config.sampling_seed, op, layers, self.config.samples)
    }

    /// Records one observation from raw NS inputs and returns their snapshots.
    /// Every operator type must contribute at least one matrix.
    pub fn record_observation(&mut self, step: usize, sampled: &[ObservedMatrix<'_>]) -> Result<Vec<GeometrySnapshot>> {
        self.check_observation(step)?;
        let snapshots = sampled
            .iter()
            .map(|s| GeometrySnapshot::capture(step, s.op, s.layer, s.matrix, &self.uniform, SAFETY_SCALE))
            .collect::<Result<Vec<_>>>()?;
        let mut per_type = vec![Vec::new(); OperatorType::COUNT];
        for s in &snapshots {
            per_type[s.op_type.index()].push(s.ell_eff);
        }
        self.record_values(step, &per_type)?;
        Ok(snapshots)
    }

    /// Records already-measured `ell_eff` values, one list per operator type
    /// in operator order.
    pub fn record_values(&mut self, step: usize, ell_eff: &[Vec<f64>]) -> Result<()> {
        self.check_observation(step)?;
        if ell_eff.len() != OperatorType::COUNT {
            return Err(Error::Precondition(format!("expected {} types, got {}", OperatorType::COUNT, ell_eff.len())));
        }
        let medians = ell_eff
            .iter()
            .zip(OperatorType::ALL)
            .map(|(v, op)| median(v).ok_or_else(|| Error::Precondition(format!("no samples for {op} at step {step}"))))
            .collect::<Result<Vec<_>>>()?;
        for (h, m) in self.history.iter_mut().zip(medians) {
            h.push(m);
        }
        if step == self.config.horizon {
            self.make_plan()?;
        }
        Ok(())
    }

    fn check_observation(&self, step: usize) -> Result<()> {
        if self.phase != Phase::Observing {
            return Err(Error::Phase(format!("observation at step {step} after observing ended")));
        }
        if !self.config.is_observation_step(step) {
            return Err(Error::Phase(format!("step {step} is not an observation step")));
        }
        Ok(())
    }

    /// Builds the allocation from the recorded history and enters the
    /// transition.
    pub fn make_plan(&mut self) -> Result<&AllocationPlan> {
        if self.phase != Phase::Observing {
            return Err(Error::Phase("planning happens once, at the end of observing".into()));
        }
        let robust = robust_aggregate(&self.history)?;
        let targets: Vec<(OperatorType, f64)> = OperatorType::ALL
            .iter()
            .zip(&robust)
            .map(|(&op, &r)| {
                let t = shrink_target(r, self.config.alpha, self.config.ell_base);
                if t < MIN_ELL {
                    log::warn!("{op}: ell target {t:e} clamped to {MIN_ELL:e}");
                }
                (op, t.clamp(MIN_ELL, 1.0 - 1e-9))
            })
            .collect();
        let (plan, curves) = plan_for_targets(&targets, &self.config)?;
        log::info!(
            "plan: budget {} over {:?}: {}",
            plan.budget,
            plan.range,
            plan.per_type.iter().map(|e| format!("{}={}", e.name, e.steps)).collect::<Vec<_>>().join(" ")
        );
        self.plan = Some(plan);
        self.curves = curves;
        self.phase = Phase::Transitioning;
        self.transition_u = 0;
        Ok(self.plan.as_ref().expect("just stored"))
    }

    /// Per-type schedules at transition progress `u` in `1..=Δ`.
    pub fn transition_schedule(&self, u: usize) -> Result<Vec<TypeSchedule>> {
        let plan = self.plan.as_ref().ok_or_else(|| Error::Phase("no plan yet".into()))?;
        let delta = self.config.transition_delta;
        if u == 0 || u > delta {
            return Err(Error::Phase(format!("transition progress {u} outside [1, {delta}]")));
        }
        let targets: Vec<usize> = plan.per_type.iter().map(|e| e.steps).collect();
        let counts = interpolate_counts(self.config.t_base, &targets, u, delta, plan.range)?;
        let p = u as f64 / delta as f64;
        plan.per_type
            .iter()
            .zip(counts)
            .map(|(e, steps)| {
                let ell = if u == delta {
                    e.ell_target
                } else {
                    self.config.ell_base + p * (e.ell_target - self.config.ell_base)
                };
                Ok(TypeSchedule { op: e.name, steps, ell, schedule: self.cache.get_or_compose(steps, ell)? })
            })
            .collect()
    }

    /// Moves the phase forward to where `step` belongs. Never moves backwards.
    pub fn advance_to(&mut self, step: usize) -> Result<Phase> {
        let target = self.config.phase_at(step);
        if target < self.phase {
            return Err(Error::Phase(format!("step {step} is behind phase {:?}", self.phase)));
        }
        if target > Phase::Observing && self.plan.is_none() {
            return Err(Error::Phase(format!("step {step} needs a plan but none was made")));
        }
        match target {
            Phase::Observing => {}
            Phase::Transitioning => self.transition_u = step - self.config.horizon,
            Phase::Locked => self.transition_u = self.config.transition_delta,
        }
        if target != self.phase {
            log::info!("step {step}: {:?} -> {:?}", self.phase, target);
        }
        self.phase = target;
        Ok(target)
    }

    /// NS schedule and safety scale for `op` at `step`.
    pub fn schedule_for_step(&self, step: usize, op: OperatorType) -> Result<(Arc<CoefficientSchedule>, f64)> {
        let schedule = match self.config.phase_at(step) {
            Phase::Observing => Arc::clone(&self.uniform),
            Phase::Transitioning | Phase::Locked => {
                let u = (step - self.config.horizon).min(self.config.transition_delta);
                self.type_schedule(u, op)?.schedule
            }
        };
        Ok((schedule, SAFETY_SCALE))
    }

    fn type_schedule(&self, u: usize, op: OperatorType) -> Result<TypeSchedule> {
        self.transition_schedule(u)?
            .into_iter()
            .find(|t| t.op == op)
            .ok_or_else(|| Error::Config(format!("plan lacks {op}")))
    }

    /// Frozen per-type schedules. Only available once a plan exists.
    pub fn locked_schedules(&self) -> Result<Vec<TypeSchedule>> {
        self.transition_schedule(self.config.transition_delta)
    }
}

/// Budget, curves and allocation for given per-type targets.
pub fn plan_for_targets(
    targets: &[(OperatorType, f64)],
    config: &ObservationConfig,
) -> Result<(AllocationPlan, Vec<ErrorCurve>)> {
    let n = targets.len();
    let budget = derive_budget(config.budget_ratio, n, config.t_base)?;
    let (lo, hi) = relaxed_range(budget, n, config.range)?;
    let curves = targets
        .iter()
        .map(|&(_, ell)| error_curve(quantize_ell(ell), lo, hi))
        .collect::<Result<Vec<_>>>()?;
    let allocation = allocate(&curves, budget, config.range, config.t_base)?;
    Ok((AllocationPlan::new(&allocation, targets)?, curves))
}

impl ScheduleProvider for SchedulerState {
    fn schedule(&self, step: usize, op: OperatorType) -> Result<(Arc<CoefficientSchedule>, f64)> {
        self.schedule_for_step(step, op)
    }
}
