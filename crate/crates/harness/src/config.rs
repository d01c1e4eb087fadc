//! Run, sweep and training configuration files (JSON).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use ste_core::{Bounds, BeliefConfig, EnvConfig, LearnerConfig, LookaheadConfig, Param, ParamRange, PlannerKind};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Closed interval for a uniformly drawn scenario parameter. `min == max`
/// pins the parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(HarnessError::Config(format!("range for {name} is empty or non-finite")));
        }
        Ok(())
    }
}

/// Per-parameter scenario distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioDistributions {
    pub x: Range,
    pub y: Range,
    pub release_rate: Range,
    pub wind_speed: Range,
    /// Degrees.
    pub wind_direction_deg: Range,
    pub diffusivity: Range,
    pub lifetime: Range,
}

impl Default for ScenarioDistributions {
    fn default() -> Self {
        Self {
            x: Range::new(10.0, 25.0),
            y: Range::new(10.0, 25.0),
            release_rate: Range::new(100.0, 500.0),
            wind_speed: Range::new(1.0, 4.0),
            wind_direction_deg: Range::new(0.0, 360.0),
            diffusivity: Range::new(1.0, 8.0),
            lifetime: Range::fixed(10.0),
        }
    }
}

impl ScenarioDistributions {
    pub fn validate(&self, domain: &Bounds) -> Result<()> {
        for (name, r) in [
            ("x", &self.x),
            ("y", &self.y),
            ("release_rate", &self.release_rate),
            ("wind_speed", &self.wind_speed),
            ("wind_direction_deg", &self.wind_direction_deg),
            ("diffusivity", &self.diffusivity),
            ("lifetime", &self.lifetime),
        ] {
            r.check(name)?;
        }
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.x.min < domain.min.x || self.x.max > domain.max.x || self.y.min < domain.min.y || self.y.max > domain.max.y {
            return bad("source location ranges must lie inside the domain");
        }
        if self.release_rate.min <= 0.0 || self.diffusivity.min <= 0.0 || self.lifetime.min <= 0.0 {
            return bad("release rate, diffusivity and lifetime must be positive");
        }
        if self.wind_speed.min < 0.0 {
            return bad("wind speed must be non-negative");
        }
        Ok(())
    }
}

/// A statistical planner or a trained Q-network checkpoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PolicySpec {
    Planner(PlannerKind),
    Dqn(PathBuf),
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Planner(k) => k.name().to_string(),
            PolicySpec::Dqn(_) => "dqn".to_string(),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Planner(k) => write!(f, "{k}"),
            PolicySpec::Dqn(p) => write!(f, "dqn:{}", p.display()),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("dqn:") {
            if path.is_empty() {
                return Err("dqn policy needs a checkpoint path: dqn:<path>".into());
            }
            return Ok(PolicySpec::Dqn(PathBuf::from(path)));
        }
        PlannerKind::from_name(s)
            .map(PolicySpec::Planner)
            .ok_or_else(|| format!("unknown policy {s:?} (expected infotaxis|entrotaxis|dcee|random|dqn:<checkpoint>)"))
    }
}

impl TryFrom<String> for PolicySpec {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PolicySpec> for String {
    fn from(p: PolicySpec) -> String {
        p.to_string()
    }
}

/// Belief settings other than particle count and threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeliefOptions {
    pub resample_fraction: f64,
    pub mcmc_move: bool,
    pub mcmc_scale: f64,
    /// Estimated dimensions and priors; `None` means source position over
    /// the whole domain.
    pub estimated: Option<Vec<ParamRange>>,
}

impl Default for BeliefOptions {
    fn default() -> Self {
        Self {
            resample_fraction: 0.5,
            mcmc_move: true,
            mcmc_scale: 0.5,
            estimated: None,
        }
    }
}

impl BeliefOptions {
    pub fn build(&self, domain: &Bounds, n_particles: usize, zeta: f64) -> BeliefConfig {
        let mut cfg = BeliefConfig::position_only(domain, n_particles, zeta);
        cfg.resample_fraction = self.resample_fraction;
        cfg.mcmc_move = self.mcmc_move;
        cfg.mcmc_scale = self.mcmc_scale;
        if let Some(est) = &self.estimated {
            cfg.estimated = est.clone();
        }
        cfg
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_particles() -> usize {
    1000
}
fn default_zeta() -> f64 {
    0.4
}
fn default_episodes() -> usize {
    100
}
fn default_radius() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}

/// Everything needed to run one cell of episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub policy: PolicySpec,
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default = "default_zeta")]
    pub cessation_threshold: f64,
    #[serde(default = "default_episodes")]
    pub n_episodes: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Meters between final estimate and true source for a success.
    #[serde(default = "default_radius")]
    pub success_radius: f64,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub belief: BeliefOptions,
    #[serde(default)]
    pub lookahead: LookaheadConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub scenarios: ScenarioDistributions,
    /// Run the episodes of a cell on the rayon pool.
    #[serde(default)]
    pub parallel: bool,
    /// Keep per-step traces (needed for trajectory CSVs).
    #[serde(default = "default_true")]
    pub record_trace: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(policy: PolicySpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            policy,
            n_particles: default_particles(),
            cessation_threshold: default_zeta(),
            n_episodes: default_episodes(),
            base_seed: 0,
            success_radius: default_radius(),
            env: EnvConfig::default(),
            belief: BeliefOptions::default(),
            lookahead: LookaheadConfig::default(),
            learner: LearnerConfig::default(),
            scenarios: ScenarioDistributions::default(),
            parallel: false,
            record_trace: true,
            output_dir: None,
        }
    }

    pub fn belief_config(&self) -> BeliefConfig {
        self.belief.build(&self.env.domain, self.n_particles, self.cessation_threshold)
    }

    /// Human-readable cell name, including any checkpoint path.
    pub fn cell_label(&self) -> String {
        format!("{}|{}|{}", self.policy, self.n_particles, self.cessation_threshold)
    }

    /// Keys the agent seed stream. Leaves out the checkpoint path so a
    /// checkpoint gives the same records wherever it is stored.
    pub fn seed_label(&self) -> String {
        format!("{}|{}|{}", self.policy.label(), self.n_particles, self.cessation_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_episodes == 0 {
            return Err(HarnessError::Config("n_episodes must be at least 1".into()));
        }
        if !(self.success_radius > 0.0) {
            return Err(HarnessError::Config("success_radius must be positive".into()));
        }
        self.env.validate()?;
        self.belief_config().validate()?;
        self.lookahead.validate()?;
        self.scenarios.validate(&self.env.domain)?;
        if let Some(est) = &self.belief.estimated {
            for r in est.iter().filter(|r| r.param == Param::X || r.param == Param::Y) {
                let (lo, hi) = if r.param == Param::X {
                    (self.env.domain.min.x, self.env.domain.max.x)
                } else {
                    (self.env.domain.min.y, self.env.domain.max.y)
                };
                if r.min < lo || r.max > hi {
                    return Err(HarnessError::Config("position prior must lie inside the domain".into()));
                }
            }
        }
        Ok(())
    }
}

/// Cartesian grid of cells over a shared base configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: RunConfig,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub n_particles: Vec<usize>,
    #[serde(default)]
    pub cessation_thresholds: Vec<f64>,
}

impl SweepConfig {
    /// Expands the grid (policy-major). An empty axis keeps the base value.
    pub fn cells(&self) -> Vec<RunConfig> {
        let policies = if self.policies.is_empty() {
            vec![self.base.policy.clone()]
        } else {
            self.policies.clone()
        };
        let ns = if self.n_particles.is_empty() {
            vec![self.base.n_particles]
        } else {
            self.n_particles.clone()
        };
        let zetas = if self.cessation_thresholds.is_empty() {
            vec![self.base.cessation_threshold]
        } else {
            self.cessation_thresholds.clone()
        };
        let mut out = Vec::new();
        for p in &policies {
            for &n in &ns {
                for &z in &zetas {
                    let mut c = self.base.clone();
                    c.policy = p.clone();
                    c.n_particles = n;
                    c.cessation_threshold = z;
                    out.push(c);
                }
            }
        }
        out
    }
}

fn default_eval() -> usize {
    100
}

/// Learner training description for `ste train`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default = "default_zeta")]
    pub cessation_threshold: f64,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub belief: BeliefOptions,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub scenarios: ScenarioDistributions,
    /// Held-out greedy evaluation episodes after training (0 skips it).
    #[serde(default = "default_eval")]
    pub eval_episodes: usize,
    #[serde(default = "default_radius")]
    pub success_radius: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            base_seed: 0,
            n_particles: default_particles(),
            cessation_threshold: default_zeta(),
            env: EnvConfig::default(),
            belief: BeliefOptions::default(),
            learner: LearnerConfig::default(),
            scenarios: ScenarioDistributions::default(),
            eval_episodes: default_eval(),
            success_radius: default_radius(),
        }
    }
}

impl TrainConfig {
    pub fn belief_config(&self) -> BeliefConfig {
        self.belief.build(&self.env.domain, self.n_particles, self.cessation_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.env.validate()?;
        self.belief_config().validate()?;
        self.learner.validate()?;
        self.scenarios.validate(&self.env.domain)?;
        Ok(())
    }

    /// Evaluation config for the trained checkpoint at `checkpoint`.
    pub fn eval_config(&self, checkpoint: &Path) -> RunConfig {
        let mut cfg = RunConfig::new(PolicySpec::Dqn(checkpoint.to_path_buf()));
        cfg.n_particles = self.n_particles;
        cfg.cessation_threshold = self.cessation_threshold;
        cfg.n_episodes = self.eval_episodes.max(1);
        cfg.base_seed = self.base_seed;
        cfg.success_radius = self.success_radius;
        cfg.env = self.env.clone();
        cfg.belief = self.belief.clone();
        cfg.learner = self.learner.clone();
        cfg.scenarios = self.scenarios.clone();
        cfg
    }
}

/// Reads a JSON config. Unreadable or malformed files are config errors.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_value(load_value(path)?).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

pub fn load_value(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}
