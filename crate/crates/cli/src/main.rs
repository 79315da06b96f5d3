use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use amo_core::allocator::{allocate, brute_force_allocate, derive_budget, relaxed_range, AllocationPlan};
use amo_core::compose::{compose, error_curve, quantize_ell, simulate};
use amo_core::ns::{builtin_schedule, CoefficientSchedule, CoefficientTriplet};
use amo_core::scheduler::{ObservationConfig, SchedulerState};
use amo_core::OperatorType;
use amo_harness::artifacts::{write_curves_csv, write_json, write_run, write_trace_series_csv};
use amo_harness::trace::{read_jsonl, trace_stats};
use amo_harness::train::LockedReportEntry;
use amo_harness::{run_training, OptimizerKind, RunConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "amo", version, about = "Adaptive Newton-Schulz step allocation for Muon")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the budget ratio r.
    #[arg(long, global = true)]
    budget_ratio: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose per-step coefficients for a lower bound and step count.
    Compose {
        #[arg(long)]
        ell: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Push the interval [ell, 1] through a schedule.
    Simulate {
        #[arg(long)]
        ell: f64,
        /// Step count of a composed schedule.
        #[arg(long, conflicts_with = "schedule")]
        steps: Option<usize>,
        /// Built-in fixed table instead (KJ-5 or You-5).
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Allocate the step budget for given per-type lower bounds.
    Allocate {
        /// Seven comma-separated lower bounds in operator order.
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<f64>,
        /// Also run exhaustive search and require the same objective.
        #[arg(long)]
        oracle: bool,
    },
    /// Build a plan from a geometry log of observations.
    Plan {
        #[arg(long)]
        geometry: PathBuf,
    },
    /// Train the toy model.
    Train {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        optimizer: Option<OptimizerKind>,
    },
    /// Summarize a geometry trace.
    Trace {
        #[arg(long)]
        log: PathBuf,
    },
}

#[derive(Serialize)]
struct ComposeOutput {
    ell: f64,
    steps: usize,
    triplets: Vec<CoefficientTriplet>,
    final_interval: (f64, f64),
}

#[derive(Serialize)]
struct AllocateOutput {
    plan: AllocationPlan,
    objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_objective: Option<f64>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(r) = cli.budget_ratio {
        config.observation.budget_ratio = r;
    }
    Ok(config)
}

fn emit<T: Serialize>(out: Option<&Path>, file: &str, value: &T) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write_json(&dir.join(file), value)?;
        }
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn run_allocate(obs: &ObservationConfig, targets: &[f64], oracle: bool) -> Result<AllocateOutput> {
    if targets.len() != OperatorType::COUNT {
        bail!("expected {} targets, one per operator type, got {}", OperatorType::COUNT, targets.len());
    }
    let budget = derive_budget(obs.budget_ratio, targets.len(), obs.t_base)?;
    let (lo, hi) = relaxed_range(budget, targets.len(), obs.range)?;
    let curves = targets
        .iter()
        .map(|&ell| error_curve(quantize_ell(ell), lo, hi))
        .collect::<amo_core::Result<Vec<_>>>()?;
    let allocation = allocate(&curves, budget, obs.range, obs.t_base)?;
    let objective = allocation.objective(&curves);
    let oracle_objective = if oracle {
        let exact = brute_force_allocate(&curves, budget, allocation.range)?;
        let value = exact.objective(&curves);
        if value != objective {
            bail!("greedy objective {objective:e} differs from exhaustive {value:e}");
        }
        Some(value)
    } else {
        None
    };
    let named: Vec<_> = OperatorType::ALL.into_iter().zip(targets.iter().copied()).collect();
    Ok(AllocateOutput { plan: AllocationPlan::new(&allocation, &named)?, objective, oracle_objective })
}

fn run_plan(obs: ObservationConfig, geometry: &Path, out: Option<&Path>) -> Result<()> {
    let log = read_jsonl(geometry)?;
    let mut by_step: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for g in &log {
        by_step.entry(g.step).or_insert_with(|| vec![Vec::new(); OperatorType::COUNT])[g.op_type.index()].push(g.ell_eff);
    }
    let mut state = SchedulerState::new(obs)?;
    for (step, values) in &by_step {
        state.record_values(*step, values).with_context(|| format!("observation at step {step}"))?;
    }
    if state.plan().is_none() {
        log::warn!("log ends before the observation horizon; planning from {} observations", by_step.len());
        state.make_plan()?;
    }
    let plan = state.plan().expect("planned").clone();
    let locked: Vec<LockedReportEntry> = state
        .locked_schedules()?
        .into_iter()
        .map(|t| LockedReportEntry { name: t.op, steps: t.steps, ell_target: Some(t.ell), triplets: t.schedule.triplets.clone() })
        .collect();
    match out {
        Some(dir) => {
            emit(out, "plan.json", &plan)?;
            emit(out, "locked_schedules.json", &locked)?;
            let curves: Vec<_> = OperatorType::ALL.into_iter().zip(state.curves().iter().cloned()).collect();
            write_curves_csv(&dir.join("curves.csv"), &curves)?;
        }
        None => println!("{}", plan.to_json()?),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Compose { ell, steps } => {
            let schedule = compose(*ell, *steps)?;
            let final_interval = simulate(*ell, &schedule)?.final_interval();
            emit(out, "schedule.json", &ComposeOutput { ell: *ell, steps: *steps, triplets: schedule.triplets, final_interval })?;
        }
        Command::Simulate { ell, steps, schedule } => {
            let sched: CoefficientSchedule = match (steps, schedule) {
                (Some(k), None) => compose(*ell, *k)?,
                (None, Some(name)) => builtin_schedule(name)?,
                _ => bail!("pass exactly one of --steps or --schedule"),
            };
            emit(out, "trajectory.json", &simulate(*ell, &sched)?.intervals)?;
        }
        Command::Allocate { targets, oracle } => {
            let config = load_config(&cli)?;
            emit(out, "allocation.json", &run_allocate(&config.observation, targets, *oracle)?)?;
        }
        Command::Plan { geometry } => run_plan(load_config(&cli)?.observation, geometry, out)?,
        Command::Train { seed, optimizer } => {
            let mut config = load_config(&cli)?;
            if let Some(seed) = seed {
                config = config.with_seed(*seed);
            }
            if let Some(kind) = optimizer {
                config.optimizer = *kind;
            }
            let run = run_training(&config)?;
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("runs").join(config.optimizer.name()));
            write_run(&dir, &run)?;
            fs::write(dir.join("config.toml"), config.to_toml()).context("writing config.toml")?;
            log::info!(
                "{}: loss {:.4} -> {:.4}; artifacts in {}",
                config.optimizer,
                run.initial_loss(),
                run.final_loss(20),
                dir.display()
            );
        }
        Command::Trace { log } => {
            let report = trace_stats(&read_jsonl(log)?)?;
            if let Some(dir) = out {
                emit(out, "trace_report.json", &report)?;
                write_trace_series_csv(&dir.join("trace_series.csv"), &report)?;
            } else {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
        }
    }
    Ok(())
}
