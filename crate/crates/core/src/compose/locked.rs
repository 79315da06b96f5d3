use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ns::{CoefficientSchedule, CoefficientTriplet};
use crate::op::OperatorType;

pub const LOCKED_MODELS: [&str; 4] = ["Qwen3-0.6B", "Qwen3-1.7B", "Llama-3.1-760M", "Llama-3.1-1.4B"];

/// A published per-type schedule at budget ratio 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct LockedSchedule {
    pub op: OperatorType,
    pub steps: usize,
    pub ell_target: f64,
    pub schedule: CoefficientSchedule,
}

#[derive(Deserialize)]
struct LockedFile {
    models: BTreeMap<String, BTreeMap<OperatorType, LockedEntry>>,
}

#[derive(Deserialize)]
struct LockedEntry {
    #[serde(rename = "T")]
    steps: usize,
    ell_target: f64,
    triplets: Vec<CoefficientTriplet>,
}

/// All seven locked schedules of `model`, in operator order.
pub fn locked_schedules(model: &str) -> Result<Vec<LockedSchedule>> {
    let file: LockedFile = serde_json::from_str(include_str!("../../fixtures/locked_schedules.json"))?;
    let entries = file
        .models
        .get(model)
        .ok_or_else(|| Error::Config(format!("no locked schedules for model {model:?}")))?;
    OperatorType::ALL
        .iter()
        .map(|&op| {
            let e = entries
                .get(&op)
                .ok_or_else(|| Error::Config(format!("{model} fixture lacks {op}")))?;
            if e.triplets.len() != e.steps {
                return Err(Error::Config(format!("{model}/{op}: T does not match triplet count")));
            }
            Ok(LockedSchedule {
                op,
                steps: e.steps,
                ell_target: e.ell_target,
                schedule: CoefficientSchedule::new(e.triplets.clone(), Some(e.ell_target))?,
            })
        })
        .collect()
}

pub fn locked_schedule(model: &str, op: OperatorType) -> Result<LockedSchedule> {
    locked_schedules(model)?
        .into_iter()
        .find(|s| s.op == op)
        .ok_or_else(|| Error::Config(format!("{model} fixture lacks {op}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_model_sums_to_the_baseline_budget() {
        for model in LOCKED_MODELS {
            let all = locked_schedules(model).unwrap();
            assert_eq!(all.len(), 7);
            assert_eq!(all.iter().map(|s| s.steps).sum::<usize>(), 35, "{model}");
        }
    }

    #[test]
    fn smallest_model_plan() {
        let steps: Vec<_> = locked_schedules("Qwen3-0.6B").unwrap().iter().map(|s| s.steps).collect();
        assert_eq!(steps, vec![5, 6, 6, 5, 4, 5, 4]);
        let k = locked_schedule("Qwen3-0.6B", OperatorType::AttnK).unwrap();
        assert_eq!(k.schedule.triplets[0], CoefficientTriplet::new(8.2612, -23.225, 16.729));
    }

    #[test]
    fn unknown_model_is_config_error() {
        assert!(matches!(locked_schedules("GPT-2"), Err(Error::Config(_))));
    }
}
