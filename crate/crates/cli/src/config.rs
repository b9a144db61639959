//! Experiment configuration: a TOML file with optional sections, overridden by
//! command-line flags, then validated into core types before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mmpl_core::drift::ImitationModel;
use mmpl_core::scheduler::SchedulerPolicy;
use mmpl_core::{ChainingMode, CostModel, MacroLayout, NoiseModel, SegmentLayout};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Drift,
    Schedule,
    Generate,
    Compare,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Drift => "drift",
            ExperimentKind::Schedule => "schedule",
            ExperimentKind::Generate => "generate",
            ExperimentKind::Compare => "compare",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    pub trials: usize,
    pub workers: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub layout: LayoutSection,
    pub noise: NoiseSection,
    pub cost: CostSection,
    pub schedule: ScheduleSection,
    pub regret: RegretSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            trials: 1000,
            workers: vec![1, 2, 4],
            out: None,
            layout: LayoutSection::default(),
            noise: NoiseSection::default(),
            cost: CostSection::default(),
            schedule: ScheduleSection::default(),
            regret: RegretSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub n_frames: usize,
    pub t_a: usize,
    pub t_b: usize,
    pub t_c: usize,
    pub segments: usize,
    pub mode: String,
}

impl Default for LayoutSection {
    fn default() -> Self {
        Self { n_frames: 20, t_a: 2, t_b: 10, t_c: 20, segments: 10, mode: "maxthr".into() }
    }
}

/// `eps` is the shared magnitude; the per-stage keys override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_plan: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_fill: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_codec: Option<f64>,
    pub gamma: f64,
    pub jitter: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { eps: 0.01, eps_plan: None, eps_fill: None, eps_step: None, eps_codec: None, gamma: 1.0, jitter: false }
    }
}

/// `preset` is `default` (per-frame costs) or `unit` (every generating task
/// costs 1); the remaining keys override single fields of the preset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task_base_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan_overhead: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_per_frame: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reencode_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_per_context_frame: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_per_generated_frame: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub policy: String,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { policy: SchedulerPolicy::default().short_name().into() }
    }
}

/// Grid for the regret simulation: every horizon against every `eps`, plus
/// `eps = 1/T` when `inverse_horizon` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegretSection {
    pub horizons: Vec<usize>,
    pub eps: Vec<f64>,
    pub inverse_horizon: bool,
    pub cost_cap: f64,
}

impl Default for RegretSection {
    fn default() -> Self {
        Self { horizons: vec![10, 50, 200], eps: vec![0.001, 0.005], inverse_horizon: true, cost_cap: 1.0 }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<Vec<usize>>,
    pub mode: Option<String>,
    pub segments: Option<usize>,
}

/// Everything an experiment needs, already checked by the owning modules.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    pub seed: u64,
    pub trials: usize,
    pub workers: Vec<usize>,
    pub layout: MacroLayout,
    pub noise: NoiseModel,
    pub costs: CostModel,
    pub policy: SchedulerPolicy,
    pub regret: Vec<RegretSetting>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretSetting {
    pub model: ImitationModel,
    /// `eps = <value>` or `eps = 1/T`.
    pub label: String,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(workers) = &o.workers {
            self.workers = workers.clone();
        }
        if let Some(mode) = &o.mode {
            self.layout.mode = mode.clone();
        }
        if let Some(segments) = o.segments {
            self.layout.segments = segments;
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<ValidatedConfig, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1".into()));
        }
        if self.workers.is_empty() || self.workers.contains(&0) {
            return Err(invalid(format!(
                "workers must be a non-empty list of positive counts, got {:?}",
                self.workers
            )));
        }
        if (1..self.workers.len()).any(|i| self.workers[..i].contains(&self.workers[i])) {
            return Err(invalid(format!("workers must not repeat a count, got {:?}", self.workers)));
        }

        let l = &self.layout;
        let mode = ChainingMode::from_str(&l.mode).map_err(|e| invalid(format!("layout.mode: {e}")))?;
        let segment =
            SegmentLayout::new(l.n_frames, l.t_a, l.t_b, l.t_c).map_err(|e| invalid(format!("layout: {e}")))?;
        let layout = MacroLayout::new(segment, l.segments, mode).map_err(|e| invalid(format!("layout: {e}")))?;

        let n = &self.noise;
        let noise = NoiseModel {
            eps_plan: n.eps_plan.unwrap_or(n.eps),
            eps_fill: n.eps_fill.unwrap_or(n.eps),
            eps_step: n.eps_step.unwrap_or(n.eps),
            eps_codec: n.eps_codec.unwrap_or(n.eps),
            gamma: n.gamma,
            jitter: n.jitter,
            seed: self.seed,
        };
        noise.validate().map_err(|e| invalid(format!("noise: {e}")))?;

        let c = &self.cost;
        let base = match c.preset.as_deref() {
            None | Some("default") => CostModel::default(),
            Some("unit") => CostModel::unit(),
            Some(other) => {
                return Err(invalid(format!("cost.preset: unknown preset `{other}` (expected default or unit)")))
            }
        };
        let costs = CostModel {
            task_base_cost: c.task_base_cost.unwrap_or(base.task_base_cost),
            plan_overhead: c.plan_overhead.unwrap_or(base.plan_overhead),
            cost_per_frame: c.cost_per_frame.unwrap_or(base.cost_per_frame),
            context_factor: c.context_factor.unwrap_or(base.context_factor),
            reencode_cost: c.reencode_cost.unwrap_or(base.reencode_cost),
            memory_per_context_frame: c.memory_per_context_frame.unwrap_or(base.memory_per_context_frame),
            memory_per_generated_frame: c.memory_per_generated_frame.unwrap_or(base.memory_per_generated_frame),
        };
        costs.validate().map_err(|e| invalid(format!("cost: {e}")))?;

        let policy =
            SchedulerPolicy::from_str(&self.schedule.policy).map_err(|e| invalid(format!("schedule.policy: {e}")))?;

        let r = &self.regret;
        let mut regret = Vec::new();
        for &t in &r.horizons {
            let listed = r.eps.iter().map(|&e| (e, format!("eps = {e}")));
            let inverse = (r.inverse_horizon && t > 0).then(|| (1.0 / t as f64, "eps = 1/T".to_string()));
            for (eps, label) in listed.chain(inverse) {
                let model = ImitationModel::new(eps, t)
                    .and_then(|m| m.with_cost_cap(r.cost_cap))
                    .map_err(|e| invalid(format!("regret (T = {t}, eps = {eps}): {e}")))?;
                regret.push(RegretSetting { model, label });
            }
        }

        Ok(ValidatedConfig {
            seed: self.seed,
            trials: self.trials,
            workers: self.workers.clone(),
            layout,
            noise,
            costs,
            policy,
            regret,
        })
    }
}
