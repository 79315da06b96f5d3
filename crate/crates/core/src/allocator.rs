//! Splitting a global NS step budget across operator types.
//!
//! Every type has a convex, decreasing error curve over its step count. The
//! greedy below (add the best marginal gain, remove the cheapest loss, then
//! swap single steps while some type would gain more from one extra step than
//! another loses by giving one up) reaches a global minimum of `Σ Eᵢ(Tᵢ)`
//! under those two curve properties.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compose::ErrorCurve;
use crate::error::{Error, Result};
use crate::op::OperatorType;

/// Largest state space [`brute_force_allocate`] will walk.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Hard ceiling on a relaxed `k_max`.
pub const MAX_RELAXED_STEPS: usize = crate::compose::MAX_STEPS;

/// Total NS steps per optimizer step: `round(r · n_types · t_base)`, with
/// halves rounded away from zero.
pub fn derive_budget(ratio: f64, n_types: usize, t_base: usize) -> Result<usize> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Config(format!("budget ratio must be positive, got {ratio}")));
    }
    let exact = ratio * (n_types * t_base) as f64;
    // Snap away representation noise such as 1.1 · 35 = 38.50000000000000355.
    let snapped = (exact * 1e9).round() / 1e9;
    Ok(snapped.round() as usize)
}

/// The step range actually used for `budget`: the configured range when the
/// budget fits, otherwise `k_min` lowered (not below 1) or `k_max` raised.
pub fn relaxed_range(budget: usize, n_types: usize, range: (usize, usize)) -> Result<(usize, usize)> {
    let (k_min, k_max) = range;
    if n_types == 0 || k_min == 0 || k_min > k_max {
        return Err(Error::Config(format!("invalid allocation range {range:?} for {n_types} types")));
    }
    if budget < n_types * k_min {
        let lowered = budget / n_types;
        if lowered == 0 {
            return Err(Error::Config(format!(
                "budget {budget} cannot give {n_types} types one step each"
            )));
        }
        Ok((lowered, k_max))
    } else if budget > n_types * k_max {
        let raised = budget.div_ceil(n_types);
        if raised > MAX_RELAXED_STEPS {
            return Err(Error::Config(format!("budget {budget} needs more than {MAX_RELAXED_STEPS} steps per type")));
        }
        Ok((k_min, raised))
    } else {
        Ok(range)
    }
}

/// Result of an allocation: one step count per curve, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub budget: usize,
    pub range: (usize, usize),
    pub steps: Vec<usize>,
}

impl Allocation {
    pub fn objective(&self, curves: &[ErrorCurve]) -> f64 {
        objective(curves, &self.steps)
    }
}

fn objective(curves: &[ErrorCurve], steps: &[usize]) -> f64 {
    curves.iter().zip(steps).map(|(c, &k)| c.at(k)).sum()
}

fn check_curves(curves: &[ErrorCurve], range: (usize, usize)) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::Config("no curves to allocate over".into()));
    }
    for (i, c) in curves.iter().enumerate() {
        if c.k_min > range.0 || c.k_max() < range.1 {
            return Err(Error::Precondition(format!(
                "curve {i} covers [{}, {}], allocation needs {range:?}",
                c.k_min,
                c.k_max()
            )));
        }
        let window: Vec<f64> = (range.0..=range.1).map(|k| c.at(k)).collect();
        if window.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Precondition(format!("curve {i} is not strictly decreasing")));
        }
        if window.windows(3).any(|w| w[1] - w[2] > w[0] - w[1] + 1e-12) {
            return Err(Error::Precondition(format!("curve {i} is not discretely convex")));
        }
    }
    Ok(())
}

/// Greedy add / remove / transfer allocation.
pub fn allocate(curves: &[ErrorCurve], budget: usize, range: (usize, usize), t_base: usize) -> Result<Allocation> {
    let n = curves.len();
    let (lo, hi) = relaxed_range(budget, n, range)?;
    check_curves(curves, (lo, hi))?;
    if (lo, hi) != range {
        log::info!("budget {budget} infeasible on {range:?}; relaxed to [{lo}, {hi}]");
    }

    let gain = |i: usize, k: usize| curves[i].at(k) - curves[i].at(k + 1);
    let loss = |i: usize, k: usize| curves[i].at(k - 1) - curves[i].at(k);

    let mut steps = vec![t_base.clamp(lo, hi); n];
    let mut total: usize = steps.iter().sum();

    while total < budget {
        // Strict comparison keeps the lowest index on ties.
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| steps[i] < hi) {
            let g = gain(i, steps[i]);
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let (i, _) = best.expect("feasible budget leaves a receiver");
        steps[i] += 1;
        total += 1;
    }
    while total > budget {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| steps[i] > lo) {
            let l = loss(i, steps[i]);
            if best.is_none_or(|(_, b)| l < b) {
                best = Some((i, l));
            }
        }
        let (i, _) = best.expect("feasible budget leaves a donor");
        steps[i] -= 1;
        total -= 1;
    }

    'transfer: loop {
        for i in 0..n {
            if steps[i] >= hi {
                continue;
            }
            for j in (0..n).rev() {
                if i != j && steps[j] > lo && gain(i, steps[i]) > loss(j, steps[j]) {
                    steps[i] += 1;
                    steps[j] -= 1;
                    continue 'transfer;
                }
            }
        }
        break;
    }

    Ok(Allocation { budget, range: (lo, hi), steps })
}

/// Whether no single-step transfer can lower the objective.
pub fn check_optimality(steps: &[usize], range: (usize, usize), curves: &[ErrorCurve]) -> bool {
    let (lo, hi) = range;
    for (i, ci) in curves.iter().enumerate() {
        if steps[i] >= hi {
            continue;
        }
        let gain = ci.at(steps[i]) - ci.at(steps[i] + 1);
        for (j, cj) in curves.iter().enumerate() {
            if i != j && steps[j] > lo && gain > cj.at(steps[j] - 1) - cj.at(steps[j]) {
                return false;
            }
        }
    }
    true
}

/// Number of ways to write `budget` as an ordered sum of `n` parts in `range`.
pub fn composition_count(n: usize, budget: usize, range: (usize, usize)) -> u128 {
    let (lo, hi) = range;
    let mut ways = vec![0u128; budget + 1];
    ways[0] = 1;
    for _ in 0..n {
        let mut next = vec![0u128; budget + 1];
        for (s, &w) in ways.iter().enumerate().filter(|(_, w)| **w > 0) {
            for k in lo..=hi {
                if s + k <= budget {
                    next[s + k] += w;
                }
            }
        }
        ways = next;
    }
    ways[budget]
}

/// Exhaustive minimum of `Σ Eᵢ(Tᵢ)`; ties go to the lexicographically
/// smallest step vector.
pub fn brute_force_allocate(curves: &[ErrorCurve], budget: usize, range: (usize, usize)) -> Result<Allocation> {
    let n = curves.len();
    let (lo, hi) = range;
    if n == 0 || lo == 0 || lo > hi || budget < n * lo || budget > n * hi {
        return Err(Error::Config(format!("budget {budget} infeasible for {n} types on {range:?}")));
    }
    let count = composition_count(n, budget, range);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::Config(format!("{count} allocations exceed the brute-force limit")));
    }
    for (i, c) in curves.iter().enumerate() {
        if c.k_min > lo || c.k_max() < hi {
            return Err(Error::Precondition(format!("curve {i} does not cover {range:?}")));
        }
    }
    log::debug!("brute force over {count} allocations");

    struct Search<'a> {
        curves: &'a [ErrorCurve],
        lo: usize,
        hi: usize,
        current: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }
    impl Search<'_> {
        fn walk(&mut self, remaining: usize) {
            let placed = self.current.len();
            let left = self.curves.len() - placed;
            if left == 0 {
                let value = objective(self.curves, &self.current);
                if self.best.as_ref().is_none_or(|(b, _)| value < *b) {
                    self.best = Some((value, self.current.clone()));
                }
                return;
            }
            for k in self.lo..=self.hi {
                let rest = left - 1;
                if k > remaining || remaining - k < rest * self.lo || remaining - k > rest * self.hi {
                    continue;
                }
                self.current.push(k);
                self.walk(remaining - k);
                self.current.pop();
            }
        }
    }

    let mut search = Search { curves, lo, hi, current: Vec::with_capacity(n), best: None };
    search.walk(budget);
    let (_, steps) = search.best.expect("feasible budget has an allocation");
    Ok(Allocation { budget, range, steps })
}

/// One allocated type inside a serialized plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub name: OperatorType,
    #[serde(rename = "T_star")]
    pub steps: usize,
    pub ell_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub budget: usize,
    pub range: (usize, usize),
    pub per_type: Vec<PlanEntry>,
}

impl AllocationPlan {
    /// Labels an allocation. `targets` is in the same order as the curves.
    pub fn new(allocation: &Allocation, targets: &[(OperatorType, f64)]) -> Result<Self> {
        if targets.len() != allocation.steps.len() {
            return Err(Error::Config(format!(
                "{} targets for {} allocated types",
                targets.len(),
                allocation.steps.len()
            )));
        }
        let per_type = targets
            .iter()
            .zip(&allocation.steps)
            .map(|(&(name, ell_target), &steps)| PlanEntry { name, steps, ell_target })
            .collect();
        let plan = Self { budget: allocation.budget, range: allocation.range, per_type };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.per_type.iter().map(|e| e.steps).sum();
        if total != self.budget {
            return Err(Error::Config(format!("plan sums to {total}, budget is {}", self.budget)));
        }
        let (lo, hi) = self.range;
        if let Some(e) = self.per_type.iter().find(|e| e.steps < lo || e.steps > hi) {
            return Err(Error::Config(format!("{} has {} steps outside {:?}", e.name, e.steps, self.range)));
        }
        if let Some(e) = self.per_type.iter().find(|e| !(e.ell_target > 0.0 && e.ell_target < 1.0)) {
            return Err(Error::Config(format!("{} has ell_target {} outside (0, 1)", e.name, e.ell_target)));
        }
        Ok(())
    }

    pub fn steps_for(&self, op: OperatorType) -> Option<usize> {
        self.per_type.iter().find(|e| e.name == op).map(|e| e.steps)
    }

    pub fn entry(&self, op: OperatorType) -> Option<&PlanEntry> {
        self.per_type.iter().find(|e| e.name == op)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Matrix shapes `(rows, cols, count)` per operator type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub shapes: BTreeMap<OperatorType, Vec<(usize, usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEstimate {
    pub total_flops: f64,
    /// Fraction of `total_flops` spent on each type, in plan order.
    pub share: Vec<(OperatorType, f64)>,
}

impl CostModel {
    pub fn add(&mut self, op: OperatorType, rows: usize, cols: usize, count: usize) -> Result<()> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!("{op}: empty shape {rows}x{cols}")));
        }
        self.shapes.entry(op).or_default().push((rows, cols, count));
        Ok(())
    }

    /// FLOPs of one NS step over every matrix of `op`: three products at
    /// `2·min²·max` each per matrix.
    pub fn step_cost(&self, op: OperatorType) -> Option<f64> {
        self.shapes.get(&op).map(|shapes| {
            shapes
                .iter()
                .map(|&(m, n, count)| {
                    let (small, large) = (m.min(n) as f64, m.max(n) as f64);
                    count as f64 * 6.0 * small * small * large
                })
                .sum()
        })
    }
}

pub fn cost_estimate(plan: &AllocationPlan, model: &CostModel) -> Result<CostEstimate> {
    let per_type = plan
        .per_type
        .iter()
        .map(|e| {
            model
                .step_cost(e.name)
                .map(|c| (e.name, c * e.steps as f64))
                .ok_or_else(|| Error::ModelMismatch(format!("no shapes for {}", e.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let total_flops: f64 = per_type.iter().map(|(_, c)| c).sum();
    let share = per_type
        .into_iter()
        .map(|(op, c)| (op, if total_flops > 0.0 { c / total_flops } else { 0.0 }))
        .collect();
    Ok(CostEstimate { total_flops, share })
}
