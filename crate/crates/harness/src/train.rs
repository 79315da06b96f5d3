use std::collections::BTreeMap;
use std::sync::Arc;

use amo_core::allocator::AllocationPlan;
use amo_core::compose::{compose, locked_schedules, ErrorCurve};
use amo_core::ns::{builtin_schedule, CoefficientSchedule, CoefficientTriplet, SAFETY_SCALE};
use amo_core::optimizer::{AdamState, MuonState};
use amo_core::scheduler::{GeometrySnapshot, ObservedMatrix, Phase, ScheduleProvider, SchedulerState, StaticSchedules};
use amo_core::{Matrix, OperatorType};
use serde::{Deserialize, Serialize};

use crate::config::{OptimizerKind, RunConfig, StaticCoefficients, StaticPlan};
use crate::data::SyntheticStream;
use crate::error::{HarnessError, Result};
use crate::model::{ParamKey, ToyModel};

/// One row of the frozen-schedule report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockedReportEntry {
    pub name: OperatorType,
    #[serde(rename = "T")]
    pub steps: usize,
    pub ell_target: Option<f64>,
    pub triplets: Vec<CoefficientTriplet>,
}

/// NS iterations applied to one operator type at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsStepRecord {
    pub step: usize,
    pub op_type: OperatorType,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub optimizer: OptimizerKind,
    /// Training loss at each step, before that step's update.
    pub losses: Vec<f64>,
    pub lrs: Vec<f64>,
    /// Scheduler phase at each step (AMO only).
    pub phases: Vec<Phase>,
    /// Scheduler observations (AMO only).
    pub geometry: Vec<GeometrySnapshot>,
    /// Periodic capture of every block matrix, if enabled.
    pub trace: Vec<GeometrySnapshot>,
    pub observation_steps: Vec<usize>,
    pub plan: Option<AllocationPlan>,
    pub curves: Vec<ErrorCurve>,
    pub locked: Vec<LockedReportEntry>,
    pub ns_steps: Vec<NsStepRecord>,
}

impl RunArtifacts {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    /// Mean of the last `window` losses, to smooth batch noise.
    pub fn final_loss(&self, window: usize) -> f64 {
        let tail = &self.losses[self.losses.len().saturating_sub(window.max(1))..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

enum Provider {
    Fixed(StaticSchedules),
    Adaptive(Box<SchedulerState>),
}

impl Provider {
    fn get(&self) -> &dyn ScheduleProvider {
        match self {
            Provider::Fixed(s) => s,
            Provider::Adaptive(s) => s.as_ref(),
        }
    }
}

fn baseline_scale(config: &RunConfig) -> f64 {
    if config.baseline_safety {
        SAFETY_SCALE
    } else {
        1.0
    }
}

fn static_provider(plan: &StaticPlan, config: &RunConfig) -> Result<StaticSchedules> {
    match plan.coefficients {
        StaticCoefficients::Fixture => {
            let model = plan.model.as_deref().expect("validated");
            let mut per_type = BTreeMap::new();
            for row in locked_schedules(model)? {
                if let Some(&k) = plan.steps.get(&row.op) {
                    if k != row.steps {
                        return Err(HarnessError::Config(format!(
                            "{model}/{}: fixture has {} steps, plan asks for {k}",
                            row.op, row.steps
                        )));
                    }
                }
                per_type.insert(row.op, row.schedule);
            }
            Ok(StaticSchedules::per_type(per_type, SAFETY_SCALE)?)
        }
        StaticCoefficients::Kj => {
            let kj = builtin_schedule("KJ-5")?;
            let per_type = plan
                .steps
                .iter()
                .map(|(&op, &k)| Ok((op, kj.with_steps(k)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(StaticSchedules::per_type(per_type, baseline_scale(config))?)
        }
        StaticCoefficients::Pe => {
            let per_type = plan
                .steps
                .iter()
                .map(|(&op, &k)| {
                    let s = if k == 0 { CoefficientSchedule::empty() } else { compose(plan.ell, k)? };
                    Ok((op, s))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(StaticSchedules::per_type(per_type, SAFETY_SCALE)?)
        }
    }
}

fn build_provider(config: &RunConfig) -> Result<Option<Provider>> {
    let fixed = |s: CoefficientSchedule, scale: f64| Ok(Some(Provider::Fixed(StaticSchedules::uniform(s, scale))));
    match config.optimizer {
        OptimizerKind::Adamw => Ok(None),
        OptimizerKind::MuonKj => fixed(builtin_schedule("KJ-5")?, baseline_scale(config)),
        OptimizerKind::MuonYou => fixed(builtin_schedule("You-5")?, baseline_scale(config)),
        OptimizerKind::MuonPe => fixed(compose(config.pe_ell, config.pe_steps)?, SAFETY_SCALE),
        OptimizerKind::StaticPlan => {
            let plan = config.static_plan.as_ref().expect("validated");
            Ok(Some(Provider::Fixed(static_provider(plan, config)?)))
        }
        OptimizerKind::Amo => Ok(Some(Provider::Adaptive(Box::new(SchedulerState::new(config.observation.clone())?)))),
    }
}

fn clip_gradients(grads: &mut ToyModel, max_norm: f64) {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale_all(max_norm / norm);
    }
}

/// Trains the toy model under `config`. Fully deterministic given the config.
pub fn run_training(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let mut model = ToyModel::new(config.model.clone())?;
    let mut data = SyntheticStream::new(config.model.vocab, config.model.seq_len, config.seed.wrapping_add(1));
    let lr_schedule = config.lr_schedule()?;
    let mut provider = build_provider(config)?;
    let layers = config.model.layers;

    let mut adam_states: BTreeMap<ParamKey, AdamState> = model
        .params()
        .into_iter()
        .filter(|(k, _)| !(config.optimizer.uses_muon() && k.is_block_matrix()))
        .map(|(k, p)| (k, AdamState::new(p.len())))
        .collect();
    let mut muon_states: BTreeMap<(usize, OperatorType), MuonState> = BTreeMap::new();
    if config.optimizer.uses_muon() {
        for l in 0..layers {
            for op in OperatorType::ALL {
                let (r, c) = config.model.shape_of(op);
                muon_states.insert((l, op), MuonState::new(r, c));
            }
        }
    }

    let mut out = RunArtifacts {
        optimizer: config.optimizer,
        losses: Vec::with_capacity(config.steps),
        lrs: Vec::with_capacity(config.steps),
        phases: Vec::new(),
        geometry: Vec::new(),
        trace: Vec::new(),
        observation_steps: Vec::new(),
        plan: None,
        curves: Vec::new(),
        locked: Vec::new(),
        ns_steps: Vec::new(),
    };

    for step in 1..=config.steps {
        let batch = data.batch(config.batch);
        let (loss, mut grads) = model.loss_and_grad(&batch)?;
        if !loss.is_finite() {
            return Err(HarnessError::Diverged);
        }
        out.losses.push(loss);
        clip_gradients(&mut grads, config.clip_norm);
        let lr = lr_schedule.at(step - 1);
        out.lrs.push(lr);

        if let Some(Provider::Adaptive(state)) = provider.as_mut() {
            out.phases.push(state.advance_to(step)?);
        }

        // Dense parameters: AdamW.
        let grad_params = grads.params();
        for ((key, param), (_, grad)) in model.params_mut().into_iter().zip(grad_params) {
            if let Some(state) = adam_states.get_mut(&key) {
                config.adamw.step(param, grad, state, lr)?;
            }
        }

        // Block matrices: Muon.
        let Some(active) = provider.as_ref() else { continue };
        let observing = match active {
            Provider::Adaptive(state) => {
                state.phase() == Phase::Observing && state.config().is_observation_step(step)
            }
            Provider::Fixed(_) => false,
        };
        let tracing = config.trace_every > 0 && step % config.trace_every == 0;
        let mut captured: Vec<(OperatorType, usize, Matrix, Matrix, f64)> = Vec::new();
        for op in OperatorType::ALL {
            let (schedule, scale): (Arc<CoefficientSchedule>, f64) = active.get().schedule(step, op)?;
            out.ns_steps.push(NsStepRecord { step, op_type: op, steps: schedule.steps() });
            let sampled = match active {
                Provider::Adaptive(state) if observing => state.sampled_layers(op, layers),
                _ => Vec::new(),
            };
            for l in 0..layers {
                let state = muon_states.get_mut(&(l, op)).expect("every block matrix has a buffer");
                let param = model.blocks[l].matrix_mut(op);
                let result = config.muon.step(param, grads.blocks[l].matrix(op), state, &schedule, scale, lr)?;
                if tracing || sampled.contains(&l) {
                    captured.push((op, l, result.ns_input, result.direction, scale));
                }
            }
        }

        if tracing {
            for (op, l, input, output, scale) in &captured {
                if input.frobenius_norm() > 0.0 {
                    out.trace.push(GeometrySnapshot::from_output(step, *op, *l, input, output, *scale)?);
                }
            }
        }
        if observing {
            let Some(Provider::Adaptive(state)) = provider.as_mut() else { unreachable!() };
            let observed: Vec<ObservedMatrix<'_>> = captured
                .iter()
                .filter(|(op, l, ..)| state.sampled_layers(*op, layers).contains(l))
                .map(|(op, l, input, ..)| ObservedMatrix { op: *op, layer: *l, matrix: input })
                .collect();
            out.geometry.extend(state.record_observation(step, &observed)?);
            out.observation_steps.push(step);
        }
    }

    match provider {
        Some(Provider::Adaptive(state)) => {
            if let Some(plan) = state.plan() {
                out.plan = Some(plan.clone());
                out.curves = state.curves().to_vec();
                out.locked = state
                    .locked_schedules()?
                    .into_iter()
                    .map(|t| LockedReportEntry {
                        name: t.op,
                        steps: t.steps,
                        ell_target: Some(t.ell),
                        triplets: t.schedule.triplets.clone(),
                    })
                    .collect();
            }
        }
        Some(Provider::Fixed(fixed)) if config.optimizer == OptimizerKind::StaticPlan => {
            out.locked = OperatorType::ALL
                .iter()
                .map(|&op| {
                    let s = fixed.get(op);
                    LockedReportEntry { name: op, steps: s.steps(), ell_target: s.declared_ell, triplets: s.triplets.clone() }
                })
                .collect();
        }
        _ => {}
    }
    Ok(out)
}
