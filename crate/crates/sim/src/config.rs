//! Experiment configuration as read from JSON.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use hetbandit_core::glm::Link;
use hetbandit_core::NoiseKind;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// ML² with least-squares ERM and the sub-Gaussian radius.
    #[serde(rename = "ml2-erm-4.1")]
    Ml2ErmSubgaussian,
    /// ML² with least-squares ERM and the fixed-level variance-aware radius.
    #[serde(rename = "ml2-erm-5.1")]
    Ml2ErmVarianceAware,
    /// ML² with least-squares ERM and the variance-aware radius with a union
    /// bound over levels.
    #[serde(rename = "ml2-erm-5.2")]
    Ml2ErmUnion,
    #[serde(rename = "ml2-gloc")]
    Ml2Gloc,
    /// Single level with `σ̄ = R`: plain eluder-UCB on finite classes, one
    /// GLOC learner on GLM environments.
    #[serde(rename = "baseline-eluder-ucb")]
    BaselineEluderUcb,
    /// Always plays `argmax f*`.
    #[serde(rename = "oracle")]
    Oracle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ml2ErmSubgaussian => "ml2-erm-4.1",
            Self::Ml2ErmVarianceAware => "ml2-erm-5.1",
            Self::Ml2ErmUnion => "ml2-erm-5.2",
            Self::Ml2Gloc => "ml2-gloc",
            Self::BaselineEluderUcb => "baseline-eluder-ucb",
            Self::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_bound() -> f64 {
    1.0
}

fn default_set_size() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    /// An explicit class read from `class`, or a random table of
    /// `functions × actions` values in `[−bound, bound]` drawn from
    /// `class_seed`. `f*` is drawn from the class per seed.
    FiniteClass {
        #[serde(default)]
        class: Option<PathBuf>,
        #[serde(default)]
        functions: Option<usize>,
        #[serde(default)]
        actions: Option<usize>,
        #[serde(default = "default_bound")]
        bound: f64,
        #[serde(default)]
        class_seed: u64,
        #[serde(default = "default_set_size")]
        decision_set_size: usize,
    },
    /// Class `{f_j(a) = gap · 1[a = j]}` declared with reward bound `bound`;
    /// every sub-optimal action has gap exactly `gap` whenever the best
    /// action is offered.
    Needle {
        actions: usize,
        gap: f64,
        #[serde(default = "default_bound")]
        bound: f64,
        #[serde(default = "default_set_size")]
        decision_set_size: usize,
    },
    /// `r = h(aᵀθ*) + ε`. Decision sets are `actions` every round when
    /// given, otherwise fresh uniform draws from the radius-`action_bound`
    /// sphere.
    Glm {
        link: Link,
        theta_star: Vec<f64>,
        #[serde(default = "default_bound")]
        action_bound: f64,
        #[serde(default = "default_bound")]
        param_bound: f64,
        #[serde(default = "default_set_size")]
        decision_set_size: usize,
        #[serde(default)]
        actions: Option<Vec<Vec<f64>>>,
    },
}

impl EnvironmentSpec {
    pub fn is_glm(&self) -> bool {
        matches!(self, Self::Glm { .. })
    }
}

fn default_power() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Constant { sigma: f64 },
    /// `high` on an evenly spaced `fraction` of rounds, `low` elsewhere.
    Bursty { high: f64, low: f64, fraction: f64 },
    /// `σ_t = initial · t^(−power)`.
    Decaying {
        initial: f64,
        #[serde(default = "default_power")]
        power: f64,
    },
    /// Independent `U[low, high]` draws per round, fixed by the seed.
    Uniform { low: f64, high: f64 },
    Explicit { values: Vec<f64> },
    /// JSON list of `{"t": .., "sigma": ..}` covering rounds `1..=T`.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Sub-Gaussian parameter `R`.
    pub bound: f64,
    #[serde(default)]
    pub distribution: NoiseKind,
    pub schedule: ScheduleSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaBarKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaBar {
    Value(f64),
    Keyword(SigmaBarKeyword),
}

impl Default for SigmaBar {
    fn default() -> Self {
        Self::Keyword(SigmaBarKeyword::Auto)
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_delta() -> f64 {
    0.1
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub noise: NoiseConfig,
    pub algorithm: Algorithm,
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Covering scale; `T⁻²` when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub sigma_bar: SigmaBar,
    /// Ridge parameter of the GLOC ellipsoids.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Clip GLOC predictions `z_t` to `[−AB, AB]`.
    #[serde(default)]
    pub clip_z: bool,
    /// Directory for CSV and JSON artifacts.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            SimError::config(field, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let mut config = Self::from_json_str(&text)?;
        if let Some(dir) = path.parent() {
            config.rebase(dir);
        }
        Ok(config)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let EnvironmentSpec::FiniteClass { class: Some(p), .. } = &mut self.environment {
            fix(p);
        }
        if let ScheduleSpec::File { path } = &mut self.noise.schedule {
            fix(path);
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| (self.horizon as f64).powi(-2))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(SimError::config("horizon", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(SimError::config("seeds", "at least one seed is required"));
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return Err(SimError::config("seeds", "seeds must be distinct"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SimError::config("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(SimError::config("alpha", format!("must be non-negative, got {a}")));
            }
        }
        if let SigmaBar::Value(s) = self.sigma_bar {
            if !(s > 0.0 && s.is_finite()) {
                return Err(SimError::config("sigma_bar", format!("must be positive, got {s}")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SimError::config("lambda", format!("must be positive, got {}", self.lambda)));
        }
        self.validate_noise()?;
        self.validate_environment()?;

        let glm = self.environment.is_glm();
        match self.algorithm {
            Algorithm::Ml2Gloc if !glm => Err(SimError::config("algorithm", "ml2-gloc requires a glm environment")),
            Algorithm::Ml2ErmSubgaussian | Algorithm::Ml2ErmVarianceAware | Algorithm::Ml2ErmUnion if glm => Err(SimError::config(
                "algorithm",
                format!("{} requires a finite_class or needle environment", self.algorithm),
            )),
            Algorithm::Ml2Gloc | Algorithm::BaselineEluderUcb if glm && self.delta >= 0.25 => {
                Err(SimError::config("delta", "GLOC confidence radii require delta < 1/4"))
            }
            _ => Ok(()),
        }
    }

    fn validate_noise(&self) -> Result<()> {
        let r = self.noise.bound;
        if !(r > 0.0 && r.is_finite()) {
            return Err(SimError::config("noise.bound", format!("must be positive, got {r}")));
        }
        let in_range = |field: &str, v: f64| {
            if (0.0..=r).contains(&v) {
                Ok(())
            } else {
                Err(SimError::config(
                    format!("noise.schedule.{field}"),
                    format!("{v} is outside [0, R = {r}]"),
                ))
            }
        };
        match &self.noise.schedule {
            ScheduleSpec::Constant { sigma } => in_range("sigma", *sigma),
            ScheduleSpec::Bursty { high, low, fraction } => {
                in_range("high", *high)?;
                in_range("low", *low)?;
                if !(0.0..=1.0).contains(fraction) {
                    return Err(SimError::config("noise.schedule.fraction", "must lie in [0, 1]"));
                }
                Ok(())
            }
            ScheduleSpec::Decaying { initial, power } => {
                in_range("initial", *initial)?;
                if !(*power >= 0.0 && power.is_finite()) {
                    return Err(SimError::config("noise.schedule.power", "must be non-negative"));
                }
                Ok(())
            }
            ScheduleSpec::Uniform { low, high } => {
                in_range("low", *low)?;
                in_range("high", *high)?;
                if low > high {
                    return Err(SimError::config("noise.schedule.low", "must not exceed high"));
                }
                Ok(())
            }
            ScheduleSpec::Explicit { values } => {
                if values.len() < self.horizon {
                    return Err(SimError::config(
                        "noise.schedule.values",
                        format!("{} values for horizon {}", values.len(), self.horizon),
                    ));
                }
                for (i, v) in values.iter().enumerate() {
                    in_range(&format!("values[{i}]"), *v)?;
                }
                Ok(())
            }
            // checked when the file is read
            ScheduleSpec::File { .. } => Ok(()),
        }
    }

    fn validate_environment(&self) -> Result<()> {
        match &self.environment {
            EnvironmentSpec::FiniteClass {
                class,
                functions,
                actions,
                bound,
                decision_set_size,
                ..
            } => {
                if class.is_none() {
                    if functions.unwrap_or(0) == 0 {
                        return Err(SimError::config("environment.functions", "required and positive without a class file"));
                    }
                    if actions.unwrap_or(0) == 0 {
                        return Err(SimError::config("environment.actions", "required and positive without a class file"));
                    }
                }
                if !(*bound > 0.0 && bound.is_finite()) {
                    return Err(SimError::config("environment.bound", "must be positive"));
                }
                if *decision_set_size == 0 {
                    return Err(SimError::config("environment.decision_set_size", "must be at least 1"));
                }
            }
            EnvironmentSpec::Needle {
                actions,
                gap,
                bound,
                decision_set_size,
            } => {
                if *actions == 0 {
                    return Err(SimError::config("environment.actions", "must be at least 1"));
                }
                if !(*gap > 0.0 && gap.is_finite()) {
                    return Err(SimError::config("environment.gap", "must be positive"));
                }
                if !(*bound >= *gap && bound.is_finite()) {
                    return Err(SimError::config("environment.bound", "must be at least gap"));
                }
                if *decision_set_size == 0 {
                    return Err(SimError::config("environment.decision_set_size", "must be at least 1"));
                }
            }
            EnvironmentSpec::Glm {
                theta_star,
                action_bound,
                param_bound,
                decision_set_size,
                actions,
                ..
            } => {
                if theta_star.is_empty() {
                    return Err(SimError::config("environment.theta_star", "must be non-empty"));
                }
                let norm = theta_star.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > param_bound * (1.0 + 1e-12) {
                    return Err(SimError::config(
                        "environment.theta_star",
                        format!("norm {norm} exceeds param_bound {param_bound}"),
                    ));
                }
                if !(*action_bound > 0.0 && *param_bound > 0.0) {
                    return Err(SimError::config("environment.action_bound", "bounds must be positive"));
                }
                if *decision_set_size == 0 {
                    return Err(SimError::config("environment.decision_set_size", "must be at least 1"));
                }
                if let Some(list) = actions {
                    if list.is_empty() {
                        return Err(SimError::config("environment.actions", "must be non-empty when given"));
                    }
                    for (i, a) in list.iter().enumerate() {
                        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if a.len() != theta_star.len() || n > action_bound * (1.0 + 1e-12) {
                            return Err(SimError::config(
                                format!("environment.actions[{i}]"),
                                "wrong dimension or norm above action_bound",
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
