use std::collections::BTreeMap;
use std::sync::Arc;

use crate::allocator::AllocationPlan;
use crate::compose::ScheduleCache;
use crate::error::{Error, Result};
use crate::ns::{CoefficientSchedule, SAFETY_SCALE};
use crate::op::OperatorType;

/// Supplies the NS schedule for each operator type at each optimizer step.
pub trait ScheduleProvider {
    fn schedule(&self, step: usize, op: OperatorType) -> Result<(Arc<CoefficientSchedule>, f64)>;
}

/// The same per-type schedules at every step.
#[derive(Debug, Clone)]
pub struct StaticSchedules {
    per_type: BTreeMap<OperatorType, Arc<CoefficientSchedule>>,
    safety_scale: f64,
}

impl StaticSchedules {
    /// One schedule shared by every type.
    pub fn uniform(schedule: CoefficientSchedule, safety_scale: f64) -> Self {
        let shared = Arc::new(schedule);
        let per_type = OperatorType::ALL.iter().map(|&op| (op, Arc::clone(&shared))).collect();
        Self { per_type, safety_scale }
    }

    pub fn per_type(per_type: BTreeMap<OperatorType, CoefficientSchedule>, safety_scale: f64) -> Result<Self> {
        if let Some(op) = OperatorType::ALL.iter().find(|op| !per_type.contains_key(op)) {
            return Err(Error::Config(format!("static schedule lacks {op}")));
        }
        let per_type = per_type.into_iter().map(|(op, s)| (op, Arc::new(s))).collect();
        Ok(Self { per_type, safety_scale })
    }

    /// Composed schedules at each plan entry's step count and target.
    pub fn from_plan(plan: &AllocationPlan, cache: &ScheduleCache) -> Result<Self> {
        let mut per_type = BTreeMap::new();
        for e in &plan.per_type {
            per_type.insert(e.name, cache.get_or_compose(e.steps, e.ell_target)?);
        }
        if let Some(op) = OperatorType::ALL.iter().find(|op| !per_type.contains_key(op)) {
            return Err(Error::Config(format!("plan lacks {op}")));
        }
        Ok(Self { per_type, safety_scale: SAFETY_SCALE })
    }

    pub fn get(&self, op: OperatorType) -> &Arc<CoefficientSchedule> {
        &self.per_type[&op]
    }

    pub fn safety_scale(&self) -> f64 {
        self.safety_scale
    }
}

impl ScheduleProvider for StaticSchedules {
    fn schedule(&self, _step: usize, op: OperatorType) -> Result<(Arc<CoefficientSchedule>, f64)> {
        Ok((Arc::clone(self.get(op)), self.safety_scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ns::builtin_schedule;

    #[test]
    fn uniform_provider_ignores_step_and_type() {
        let p = StaticSchedules::uniform(builtin_schedule("KJ-5").unwrap(), 1.0);
        let (a, s) = p.schedule(1, OperatorType::AttnQ).unwrap();
        let (b, _) = p.schedule(999, OperatorType::MlpDown).unwrap();
        assert_eq!(s, 1.0);
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn per_type_needs_every_type() {
        let mut m = BTreeMap::new();
        m.insert(OperatorType::AttnQ, CoefficientSchedule::empty());
        assert!(StaticSchedules::per_type(m, 1.01).is_err());
    }
}
