use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use amo_core::scheduler::{median, GeometrySnapshot};
use amo_core::OperatorType;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Layers counted as "shallow" (from the bottom) and "deep" (from the top).
pub const GROUP_DEPTH: usize = 3;

/// Summary statistics of a geometry trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub pairs: usize,
    /// Pearson correlation of `log10 κ` against `eps_norm`; `None` if either
    /// side has zero variance.
    pub pearson_r: Option<f64>,
    pub zero_variance: bool,
    /// Median κ across layers, per operator type, at every logged step.
    pub type_series: BTreeMap<OperatorType, Vec<(usize, f64)>>,
    /// Median κ across operator types, per layer, at every logged step.
    pub layer_series: BTreeMap<usize, Vec<(usize, f64)>>,
    pub shallow_series: Vec<(usize, f64)>,
    pub deep_series: Vec<(usize, f64)>,
    /// First step at which the shallow/deep ordering flips relative to the
    /// first logged step.
    pub crossing_step: Option<usize>,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let scale = sxx.sqrt() * syy.sqrt();
    if !(scale > 0.0) || sxx <= 1e-24 * n as f64 || syy <= 1e-24 * n as f64 {
        return None;
    }
    Some((sxy / scale).clamp(-1.0, 1.0))
}

fn median_series<K: Ord + Copy>(groups: BTreeMap<(K, usize), Vec<f64>>) -> BTreeMap<K, Vec<(usize, f64)>> {
    let mut out: BTreeMap<K, Vec<(usize, f64)>> = BTreeMap::new();
    for ((key, step), values) in groups {
        out.entry(key).or_default().push((step, median(&values).expect("groups are non-empty")));
    }
    out
}

pub fn trace_stats(log: &[GeometrySnapshot]) -> Result<TraceReport> {
    let types: BTreeSet<_> = log.iter().map(|g| g.op_type).collect();
    let steps: BTreeSet<_> = log.iter().map(|g| g.step).collect();
    if types.len() < 2 || steps.len() < 2 {
        return Err(HarnessError::Trace(format!(
            "need at least 2 operator types and 2 steps, got {} and {}",
            types.len(),
            steps.len()
        )));
    }

    let log_kappa: Vec<f64> = log.iter().map(|g| g.kappa.log10()).collect();
    let eps: Vec<f64> = log.iter().map(|g| g.eps_norm).collect();
    let pearson_r = pearson(&log_kappa, &eps);

    let mut by_type: BTreeMap<(OperatorType, usize), Vec<f64>> = BTreeMap::new();
    let mut by_layer: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for g in log {
        by_type.entry((g.op_type, g.step)).or_default().push(g.kappa);
        by_layer.entry((g.layer, g.step)).or_default().push(g.kappa);
    }

    let max_layer = log.iter().map(|g| g.layer).max().expect("non-empty");
    let mut shallow: BTreeMap<((), usize), Vec<f64>> = BTreeMap::new();
    let mut deep: BTreeMap<((), usize), Vec<f64>> = BTreeMap::new();
    for g in log {
        if g.layer < GROUP_DEPTH {
            shallow.entry(((), g.step)).or_default().push(g.kappa);
        }
        if g.layer + GROUP_DEPTH > max_layer {
            deep.entry(((), g.step)).or_default().push(g.kappa);
        }
    }
    let shallow_series = median_series(shallow).remove(&()).unwrap_or_default();
    let deep_series = median_series(deep).remove(&()).unwrap_or_default();

    Ok(TraceReport {
        pairs: log.len(),
        zero_variance: pearson_r.is_none(),
        pearson_r,
        type_series: median_series(by_type),
        layer_series: median_series(by_layer),
        crossing_step: crossing(&shallow_series, &deep_series),
        shallow_series,
        deep_series,
    })
}

fn crossing(a: &[(usize, f64)], b: &[(usize, f64)]) -> Option<usize> {
    let b: BTreeMap<usize, f64> = b.iter().copied().collect();
    let mut initial = None;
    for &(step, x) in a {
        let Some(&y) = b.get(&step) else { continue };
        let order = x.partial_cmp(&y)?;
        if order == std::cmp::Ordering::Equal {
            continue;
        }
        match initial {
            None => initial = Some(order),
            Some(first) if first != order => return Some(step),
            Some(_) => {}
        }
    }
    None
}

/// Reads a JSON-lines geometry log.
pub fn read_jsonl(path: &Path) -> Result<Vec<GeometrySnapshot>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(step: usize, op: OperatorType, layer: usize, kappa: f64, eps_norm: f64) -> GeometrySnapshot {
        GeometrySnapshot {
            step,
            op_type: op,
            layer,
            ell_eff: 1.0 / kappa,
            kappa,
            eps_norm,
            frobenius: 1.0,
            effective_rank: 1,
        }
    }

    #[test]
    fn exact_linear_relation_gives_unit_r() {
        let mut log = Vec::new();
        for step in 1..=10 {
            for (i, op) in [OperatorType::AttnQ, OperatorType::MlpUp].into_iter().enumerate() {
                let kappa = 10f64.powf(1.0 + 0.3 * step as f64 + i as f64);
                log.push(snap(step, op, 0, kappa, 0.1 * kappa.log10()));
            }
        }
        let report = trace_stats(&log).unwrap();
        assert!((report.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        assert!(!report.zero_variance);
        assert_eq!(report.pairs, 20);
    }

    #[test]
    fn constant_kappa_flags_zero_variance() {
        let log: Vec<_> = (1..=5)
            .flat_map(|s| [snap(s, OperatorType::AttnQ, 0, 7.0, 0.01 * s as f64), snap(s, OperatorType::AttnK, 1, 7.0, 0.02)])
            .collect();
        let report = trace_stats(&log).unwrap();
        assert!(report.zero_variance);
        assert_eq!(report.pearson_r, None);
    }

    #[test]
    fn crossing_detected_at_injected_step() {
        let mut log = Vec::new();
        for step in (0..=300).step_by(20) {
            let (shallow, deep) = if step < 120 { (100.0, 10.0) } else { (5.0, 50.0) };
            for layer in 0..6 {
                let kappa = if layer < 3 { shallow } else { deep };
                for op in [OperatorType::AttnQ, OperatorType::MlpDown] {
                    log.push(snap(step, op, layer, kappa, 0.01));
                }
            }
        }
        let report = trace_stats(&log).unwrap();
        assert_eq!(report.crossing_step, Some(120));
        assert_eq!(report.layer_series.len(), 6);
        assert_eq!(report.type_series[&OperatorType::AttnQ].len(), 16);
    }

    #[test]
    fn no_crossing_when_order_is_stable() {
        let log: Vec<_> = (1..=4)
            .flat_map(|s| (0..6).map(move |l| snap(s, OperatorType::ALL[l % 2], l, if l < 3 { 9.0 } else { 3.0 }, 0.1)))
            .collect();
        assert_eq!(trace_stats(&log).unwrap().crossing_step, None);
    }

    #[test]
    fn rejects_single_type() {
        let log: Vec<_> = (1..=3).map(|s| snap(s, OperatorType::AttnQ, 0, 2.0, 0.1)).collect();
        assert!(matches!(trace_stats(&log), Err(HarnessError::Trace(_))));
    }
}
