use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::compose::compose;
use crate::error::Result;
use crate::ns::CoefficientSchedule;

/// Rounds `ell` to four significant digits.
pub fn quantize_ell(ell: f64) -> f64 {
    format!("{ell:.3e}").parse().expect("formatted float parses")
}

/// Composed schedules keyed by `(steps, quantized ell)`.
#[derive(Debug, Default)]
pub struct ScheduleCache {
    entries: RwLock<HashMap<(usize, u64), Arc<CoefficientSchedule>>>,
}

impl ScheduleCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the schedule for `(steps, quantize_ell(ell))`, composing it on
    /// first use. The composition runs at the quantized value.
    pub fn get_or_compose(&self, steps: usize, ell: f64) -> Result<Arc<CoefficientSchedule>> {
        let q = quantize_ell(ell);
        let key = (steps, q.to_bits());
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(compose(q, steps)?);
        let mut map = self.entries.write().expect("cache lock poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(fresh)))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distinct cached keys, sorted.
    pub fn keys(&self) -> Vec<(usize, f64)> {
        let mut keys: Vec<_> = self
            .entries
            .read()
            .expect("cache lock poisoned")
            .keys()
            .map(|&(k, bits)| (k, f64::from_bits(bits)))
            .collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        keys
    }
}
