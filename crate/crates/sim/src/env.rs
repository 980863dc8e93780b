//! Seeded environments built from an [`ExperimentConfig`].

use std::path::Path;
use std::sync::Arc;

use hetbandit_core::eluder::{eluder_dimension, EluderMode, EXACT_ACTION_LIMIT};
use hetbandit_core::erm::FiniteFunctionClass;
use hetbandit_core::glm::GlmModel;
use hetbandit_core::{Environment, NoiseSpec};
use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::config::{EnvironmentSpec, ExperimentConfig, ScheduleSpec};
use crate::error::{Result, SimError};

/// Stream of the per-seed generator reserved for environment construction;
/// stream 0 drives the reward noise.
const ENV_STREAM: u64 = 1;

pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn environment_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ENV_STREAM);
    rng
}

#[derive(Debug, Clone)]
enum DecisionSets<A> {
    Fixed(Vec<A>),
    PerRound(Vec<Vec<A>>),
}

impl<A> DecisionSets<A> {
    fn get(&self, t: usize) -> &[A] {
        match self {
            Self::Fixed(set) => set,
            Self::PerRound(sets) => &sets[t - 1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FiniteEnv {
    class: Arc<FiniteFunctionClass>,
    truth: usize,
    horizon: usize,
    sets: DecisionSets<usize>,
    noise: NoiseSpec,
}

impl FiniteEnv {
    pub fn class(&self) -> &FiniteFunctionClass {
        &self.class
    }
}

impl Environment for FiniteEnv {
    type Action = usize;
    type Truth = usize;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn decision_set(&self, t: usize) -> &[usize] {
        self.sets.get(t)
    }

    fn mean_reward(&self, action: &usize) -> f64 {
        self.class.value(self.truth, *action)
    }

    fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    fn truth(&self) -> &usize {
        &self.truth
    }
}

#[derive(Debug, Clone)]
pub struct GlmEnv {
    model: GlmModel,
    theta: DVector<f64>,
    horizon: usize,
    sets: DecisionSets<DVector<f64>>,
    noise: NoiseSpec,
}

impl GlmEnv {
    pub fn model(&self) -> &GlmModel {
        &self.model
    }
}

impl Environment for GlmEnv {
    type Action = DVector<f64>;
    type Truth = DVector<f64>;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn decision_set(&self, t: usize) -> &[DVector<f64>] {
        self.sets.get(t)
    }

    fn mean_reward(&self, action: &DVector<f64>) -> f64 {
        self.model.mean(action.dot(&self.theta))
    }

    fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    fn truth(&self) -> &DVector<f64> {
        &self.theta
    }
}

pub enum AnyEnv {
    Finite(FiniteEnv),
    Glm(GlmEnv),
}

#[derive(Deserialize)]
struct ScheduleEntry {
    t: usize,
    sigma: f64,
}

fn read_schedule_file(path: &Path, horizon: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let entries: Vec<ScheduleEntry> = serde_json::from_str(&text).map_err(|source| SimError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = vec![None; horizon];
    for e in entries {
        if e.t == 0 || e.t > horizon {
            continue;
        }
        if values[e.t - 1].replace(e.sigma).is_some() {
            return Err(SimError::config("noise.schedule.path", format!("round {} listed twice", e.t)));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| SimError::config("noise.schedule.path", format!("round {} is missing", i + 1)))
        })
        .collect()
}

/// Everything shared by all seeds of an experiment: the function class, a
/// schedule that does not depend on the seed, and the eluder dimension used
/// by the automatic `σ̄`.
pub struct ExperimentPlan {
    pub config: ExperimentConfig,
    class: Option<Arc<FiniteFunctionClass>>,
    fixed_schedule: Option<Vec<f64>>,
    model: Option<GlmModel>,
}

impl ExperimentPlan {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let horizon = config.horizon;
        let class = match &config.environment {
            EnvironmentSpec::FiniteClass {
                class: Some(path),
                ..
            } => {
                let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
                Some(Arc::new(FiniteFunctionClass::from_json_str(&text)?))
            }
            EnvironmentSpec::FiniteClass {
                class: None,
                functions,
                actions,
                bound,
                class_seed,
                ..
            } => {
                let (n, k) = (functions.unwrap_or(0), actions.unwrap_or(0));
                let mut rng = ChaCha8Rng::seed_from_u64(*class_seed);
                let table = (0..n)
                    .map(|_| (0..k).map(|_| rng.random_range(-*bound..=*bound)).collect())
                    .collect();
                Some(Arc::new(FiniteFunctionClass::from_table(table, *bound)?))
            }
            EnvironmentSpec::Needle { actions, gap, bound, .. } => {
                let table = (0..*actions)
                    .map(|j| (0..*actions).map(|a| if a == j { *gap } else { 0.0 }).collect())
                    .collect();
                Some(Arc::new(FiniteFunctionClass::from_table(table, *bound)?))
            }
            EnvironmentSpec::Glm { .. } => None,
        };
        let model = match &config.environment {
            EnvironmentSpec::Glm {
                link,
                theta_star,
                action_bound,
                param_bound,
                ..
            } => Some(GlmModel::new(*link, theta_star.len(), *action_bound, *param_bound)?),
            _ => None,
        };
        let fixed_schedule = match &config.noise.schedule {
            ScheduleSpec::Uniform { .. } => None,
            ScheduleSpec::File { path } => Some(read_schedule_file(path, horizon)?),
            other => Some(deterministic_schedule(other, horizon)),
        };
        if let Some(s) = &fixed_schedule {
            NoiseSpec::new(config.noise.bound, s.clone(), config.noise.distribution)?;
        }
        Ok(Self {
            config,
            class,
            fixed_schedule,
            model,
        })
    }

    pub fn class(&self) -> Option<&FiniteFunctionClass> {
        self.class.as_deref()
    }

    pub fn model(&self) -> Option<&GlmModel> {
        self.model.as_ref()
    }

    /// Eluder dimension of the finite class at scale `1/T` over all actions;
    /// exact for up to twelve actions, otherwise a greedy lower bound.
    pub fn eluder_dimension(&self) -> Result<Option<(usize, EluderMode)>> {
        let Some(class) = self.class() else {
            return Ok(None);
        };
        let actions: Vec<usize> = (0..class.num_actions()).collect();
        let mode = if actions.len() <= EXACT_ACTION_LIMIT {
            EluderMode::Exact
        } else {
            EluderMode::GreedyLowerBound
        };
        let eps = 1.0 / self.config.horizon as f64;
        Ok(Some((eluder_dimension(class, &actions, eps, mode)?.dimension, mode)))
    }

    fn schedule(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match (&self.fixed_schedule, &self.config.noise.schedule) {
            (Some(s), _) => s.clone(),
            (None, ScheduleSpec::Uniform { low, high }) => (0..self.config.horizon)
                .map(|_| if low == high { *low } else { rng.random_range(*low..=*high) })
                .collect(),
            (None, _) => unreachable!("only uniform schedules are drawn per seed"),
        }
    }

    /// The environment of one seed. Truth, decision sets and any random
    /// schedule come from the seed's environment stream.
    pub fn environment(&self, seed: u64) -> Result<AnyEnv> {
        let horizon = self.config.horizon;
        let mut rng = environment_rng(seed);
        let schedule = self.schedule(&mut rng);
        let noise = NoiseSpec::new(self.config.noise.bound, schedule, self.config.noise.distribution)?;
        match &self.config.environment {
            EnvironmentSpec::FiniteClass { decision_set_size, .. } | EnvironmentSpec::Needle { decision_set_size, .. } => {
                let class = self.class.clone().expect("finite environments carry a class");
                let truth = rng.random_range(0..class.len());
                let n = class.num_actions();
                let sets = if *decision_set_size >= n {
                    DecisionSets::Fixed((0..n).collect())
                } else {
                    DecisionSets::PerRound(
                        (0..horizon)
                            .map(|_| {
                                let mut s = sample(&mut rng, n, *decision_set_size).into_vec();
                                s.sort_unstable();
                                s
                            })
                            .collect(),
                    )
                };
                Ok(AnyEnv::Finite(FiniteEnv {
                    class,
                    truth,
                    horizon,
                    sets,
                    noise,
                }))
            }
            EnvironmentSpec::Glm {
                theta_star,
                action_bound,
                decision_set_size,
                actions,
                ..
            } => {
                let model = self.model.clone().expect("glm environments carry a model");
                let d = theta_star.len();
                let sets = match actions {
                    Some(list) => DecisionSets::Fixed(list.iter().map(|a| DVector::from_column_slice(a)).collect()),
                    None => DecisionSets::PerRound(
                        (0..horizon)
                            .map(|_| {
                                (0..*decision_set_size)
                                    .map(|_| random_sphere_point(&mut rng, d) * *action_bound)
                                    .collect()
                            })
                            .collect(),
                    ),
                };
                Ok(AnyEnv::Glm(GlmEnv {
                    model,
                    theta: DVector::from_column_slice(theta_star),
                    horizon,
                    sets,
                    noise,
                }))
            }
        }
    }
}

fn deterministic_schedule(spec: &ScheduleSpec, horizon: usize) -> Vec<f64> {
    match spec {
        ScheduleSpec::Constant { sigma } => vec![*sigma; horizon],
        ScheduleSpec::Bursty { high, low, fraction } => (1..=horizon)
            .map(|t| {
                // round t is a burst when ⌊t·f⌋ steps up
                let burst = (t as f64 * fraction).floor() > ((t - 1) as f64 * fraction).floor();
                if burst {
                    *high
                } else {
                    *low
                }
            })
            .collect(),
        ScheduleSpec::Decaying { initial, power } => (1..=horizon).map(|t| initial * (t as f64).powf(-power)).collect(),
        ScheduleSpec::Explicit { values } => values[..horizon].to_vec(),
        ScheduleSpec::Uniform { .. } | ScheduleSpec::File { .. } => unreachable!("handled by the caller"),
    }
}

/// Uniform point on the unit sphere of `R^d`.
pub fn random_sphere_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
