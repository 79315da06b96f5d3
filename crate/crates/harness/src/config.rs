use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use amo_core::optimizer::{AdamW, LrKind, LrSchedule, Muon};
use amo_core::scheduler::ObservationConfig;
use amo_core::OperatorType;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::model::ToyModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// AdamW on every parameter.
    Adamw,
    /// Muon with the fixed KJ table.
    MuonKj,
    /// Muon with the fixed You table.
    MuonYou,
    /// Muon with one composed schedule for every type.
    MuonPe,
    /// Muon with the adaptive observe-plan-lock scheduler.
    Amo,
    /// Muon with fixed per-type step counts from a plan file.
    StaticPlan,
}

impl OptimizerKind {
    pub fn uses_muon(self) -> bool {
        self != OptimizerKind::Adamw
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adamw => "adamw",
            OptimizerKind::MuonKj => "muon-kj",
            OptimizerKind::MuonYou => "muon-you",
            OptimizerKind::MuonPe => "muon-pe",
            OptimizerKind::Amo => "amo",
            OptimizerKind::StaticPlan => "static-plan",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        [
            OptimizerKind::Adamw,
            OptimizerKind::MuonKj,
            OptimizerKind::MuonYou,
            OptimizerKind::MuonPe,
            OptimizerKind::Amo,
            OptimizerKind::StaticPlan,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| HarnessError::Config(format!("unknown optimizer {s:?}")))
    }
}

/// Where a static plan's coefficients come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StaticCoefficients {
    /// The KJ triplet repeated, no safety scale.
    Kj,
    /// Composed at `ell` for each type's step count.
    Pe,
    /// Published locked schedules of `model`.
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticPlan {
    pub coefficients: StaticCoefficients,
    #[serde(default = "default_ell")]
    pub ell: f64,
    /// Fixture model name, for `coefficients = "fixture"`.
    #[serde(default)]
    pub model: Option<String>,
    /// Step count per operator type. Required except for fixtures.
    #[serde(default)]
    pub steps: BTreeMap<OperatorType, usize>,
}

fn default_ell() -> f64 {
    1e-3
}

impl StaticPlan {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let plan: StaticPlan = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text)?,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        match self.coefficients {
            StaticCoefficients::Fixture => {
                if self.model.is_none() {
                    return Err(HarnessError::Config("fixture coefficients need a model name".into()));
                }
            }
            _ => {
                if let Some(op) = OperatorType::ALL.iter().find(|op| !self.steps.contains_key(op)) {
                    return Err(HarnessError::Config(format!("static plan lacks a step count for {op}")));
                }
                if self.steps.values().any(|&k| k > amo_core::compose::MAX_STEPS) {
                    return Err(HarnessError::Config("static plan step count too large".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub kind: LrKind,
    pub warmup: usize,
    /// Constant span for WSD; the decay takes the rest of the run.
    pub stable: usize,
    pub peak: f64,
    pub floor_fraction: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self { kind: LrKind::Wsd, warmup: 20, stable: 300, peak: 2e-2, floor_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub optimizer: OptimizerKind,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Capture geometry of every block matrix every this many steps; 0 disables.
    pub trace_every: usize,
    /// Composition target for `muon-pe`.
    pub pe_ell: f64,
    pub pe_steps: usize,
    /// Apply the 1.01 pre-NS scale to the fixed KJ/You tables too.
    pub baseline_safety: bool,
    pub model: ToyModelConfig,
    pub lr: LrConfig,
    pub muon: Muon,
    pub adamw: AdamW,
    pub observation: ObservationConfig,
    pub static_plan: Option<StaticPlan>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Amo,
            steps: 400,
            batch: 4,
            seed: 42,
            clip_norm: 1.0,
            trace_every: 0,
            pe_ell: 1e-3,
            pe_steps: 5,
            baseline_safety: false,
            model: ToyModelConfig::default(),
            lr: LrConfig::default(),
            muon: Muon::default(),
            adamw: AdamW::default(),
            observation: ObservationConfig::toy(),
            static_plan: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config always serializes")
    }

    /// Sets the data, model and sampling seeds together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.model.seed = seed;
        self.observation.sampling_seed = seed;
        self
    }

    pub fn lr_schedule(&self) -> Result<LrSchedule> {
        let s = LrSchedule {
            kind: self.lr.kind,
            warmup: self.lr.warmup,
            stable: self.lr.stable.min(self.steps.saturating_sub(self.lr.warmup)),
            total: self.steps,
            peak: self.lr.peak,
            floor_fraction: self.lr.floor_fraction,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 {
            return Err(HarnessError::Config("steps and batch must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(HarnessError::Config("clip_norm must be positive".into()));
        }
        self.model.validate()?;
        self.lr_schedule()?;
        self.muon.validate()?;
        match self.optimizer {
            OptimizerKind::Amo => {
                self.observation.validate()?;
                let needed = self.observation.horizon + self.observation.transition_delta;
                if self.steps <= needed {
                    log::warn!("{} steps end before the schedule locks at step {}", self.steps, needed + 1);
                }
            }
            OptimizerKind::StaticPlan => match &self.static_plan {
                Some(plan) => plan.validate()?,
                None => return Err(HarnessError::Config("static-plan needs a [static_plan] table".into())),
            },
            OptimizerKind::MuonPe => {
                if !(amo_core::compose::MIN_ELL..1.0).contains(&self.pe_ell) || self.pe_steps == 0 {
                    return Err(HarnessError::Config("muon-pe needs 1e-7 <= pe_ell < 1 and pe_steps >= 1".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
