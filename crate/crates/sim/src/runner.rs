//! Runs every seed of an experiment as an independent episode.

use std::marker::PhantomData;
use std::time::Instant;

use hetbandit_core::eluder::EluderMode;
use hetbandit_core::erm::{BetaKind, BetaSchedule, ErmSubroutine};
use hetbandit_core::glm::{GlmBetaParams, GlocSubroutine};
use hetbandit_core::{num_levels, run_episode, ConfidenceSubroutine, Environment, Ml2Config, RunTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig, SigmaBar};
use crate::env::{noise_rng, AnyEnv, ExperimentPlan};
use crate::error::{Result, SimError};

/// Iterations allowed for the `σ̄ ↔ L` fixed point of the automatic `σ̄`.
const AUTO_SIGMA_ITERATIONS: usize = 64;

/// Parameters after defaults and the automatic `σ̄` have been applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub sigma_bar: f64,
    pub num_levels: usize,
    pub alpha: f64,
    pub eluder_dimension: Option<usize>,
    pub eluder_mode: Option<EluderMode>,
}

impl ResolvedParams {
    pub fn new(plan: &ExperimentPlan) -> Result<Self> {
        let config = &plan.config;
        let r = config.noise.bound;
        let alpha = config.alpha();
        let eluder = match (config.algorithm, config.sigma_bar) {
            (Algorithm::Ml2ErmSubgaussian, SigmaBar::Keyword(_)) => plan.eluder_dimension()?,
            _ => None,
        };
        let sigma_bar = match (config.algorithm, config.sigma_bar) {
            (Algorithm::BaselineEluderUcb | Algorithm::Oracle, _) => r,
            (_, SigmaBar::Value(s)) => s,
            (Algorithm::Ml2ErmSubgaussian, SigmaBar::Keyword(_)) => {
                let class = plan.class().expect("validated: ERM algorithms use finite classes");
                let dim = eluder.map_or(1, |(d, _)| d.max(1)) as f64;
                let mut levels = 1;
                let mut sigma = r;
                for _ in 0..AUTO_SIGMA_ITERATIONS {
                    let log = (2.0 * class.len() as f64 * levels as f64 / config.delta).ln();
                    sigma = 1.0 / (dim * log * (config.horizon as f64).sqrt());
                    let next = num_levels(r, sigma)?;
                    if next == levels {
                        break;
                    }
                    levels = next;
                }
                sigma
            }
            (Algorithm::Ml2ErmVarianceAware | Algorithm::Ml2ErmUnion, SigmaBar::Keyword(_)) => 1.0,
            (Algorithm::Ml2Gloc, SigmaBar::Keyword(_)) => {
                let d = plan.model().expect("validated: GLOC uses a GLM environment").dim();
                r / (d as f64).sqrt()
            }
        };
        Ok(Self {
            sigma_bar,
            num_levels: num_levels(r, sigma_bar)?,
            alpha,
            eluder_dimension: eluder.map(|(d, _)| d),
            eluder_mode: eluder.map(|(_, m)| m),
        })
    }
}

/// Scores every action by its true mean; one level, never uncertain.
struct Oracle<A, T, F> {
    mean: F,
    state: (),
    _types: PhantomData<fn(&A, &T)>,
}

fn oracle<A, T, F: Fn(&A) -> f64>(mean: F) -> Oracle<A, T, F> {
    Oracle {
        mean,
        state: (),
        _types: PhantomData,
    }
}

impl<A, T, F: Fn(&A) -> f64> ConfidenceSubroutine for Oracle<A, T, F> {
    type Action = A;
    type Truth = T;
    type LevelState = ();

    fn num_levels(&self) -> usize {
        1
    }

    fn optimistic_value(&self, _level: usize, _t: usize, action: &A) -> Option<f64> {
        Some((self.mean)(action))
    }

    fn update(&mut self, _level: usize, _t: usize, _action: &A, _reward: f64) -> hetbandit_core::Result<()> {
        Ok(())
    }

    fn covers(&self, _level: usize, _t: usize, _truth: &T) -> bool {
        true
    }

    fn level_state(&self, _level: usize) -> &() {
        &self.state
    }
}

fn episode<E, S>(env: &E, config: &Ml2Config, sub: &mut S, seed: u64) -> Result<RunTrace>
where
    E: Environment,
    S: ConfidenceSubroutine<Action = E::Action, Truth = E::Truth>,
{
    Ok(run_episode(env, config, sub, &mut noise_rng(seed), Some(seed))?)
}

/// One episode for `seed`.
pub fn run_seed(plan: &ExperimentPlan, params: &ResolvedParams, seed: u64) -> Result<RunTrace> {
    let config = &plan.config;
    let r = config.noise.bound;
    let ml2 = Ml2Config::new(config.horizon, r, params.sigma_bar, config.delta, params.alpha);
    match plan.environment(seed)? {
        AnyEnv::Finite(env) => {
            let kind = match config.algorithm {
                Algorithm::Oracle => {
                    let mut sub = oracle(|a: &usize| env.mean_reward(a));
                    return episode(&env, &ml2, &mut sub, seed);
                }
                Algorithm::Ml2ErmSubgaussian | Algorithm::BaselineEluderUcb => BetaKind::Subgaussian,
                Algorithm::Ml2ErmVarianceAware => BetaKind::VarianceAware,
                Algorithm::Ml2ErmUnion => BetaKind::VarianceAwareUnion,
                Algorithm::Ml2Gloc => unreachable!("validated: GLOC needs a GLM environment"),
            };
            let class = env.class().clone();
            let schedule = BetaSchedule {
                kind,
                bound: class.bound(),
                noise_bound: r,
                sigma_bar: params.sigma_bar,
                num_levels: params.num_levels,
                delta: config.delta,
                alpha: params.alpha,
                covering_number: class.len() as f64,
            };
            let mut sub = ErmSubroutine::new(class, schedule)?;
            episode(&env, &ml2, &mut sub, seed)
        }
        AnyEnv::Glm(env) => match config.algorithm {
            Algorithm::Oracle => {
                let mut sub = oracle(|a: &nalgebra::DVector<f64>| env.mean_reward(a));
                episode(&env, &ml2, &mut sub, seed)
            }
            Algorithm::Ml2Gloc | Algorithm::BaselineEluderUcb => {
                let model = env.model().clone();
                let beta = GlmBetaParams::from_model(&model, r, params.sigma_bar, config.delta, params.num_levels, config.lambda);
                let mut sub = GlocSubroutine::new(model, beta, config.clip_z)?;
                episode(&env, &ml2, &mut sub, seed)
            }
            _ => unreachable!("validated: ERM algorithms need a finite environment"),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

/// Traces of the seeds that completed, in seed-list order.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub params: ResolvedParams,
    pub traces: Vec<RunTrace>,
    pub failures: Vec<SeedFailure>,
    pub wall_clock_seconds: f64,
}

/// Runs all seeds on up to `workers` threads (all cores when `None`).
///
/// Failed seeds are excluded and listed; more than 10% failures aborts.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let plan = ExperimentPlan::new(config.clone())?;
    let params = ResolvedParams::new(&plan)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| SimError::config("workers", e.to_string()))?;
    let results: Vec<(u64, Result<RunTrace>)> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(&plan, &params, seed)))
            .collect()
    });

    let mut traces = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(trace) => traces.push(trace),
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    let total = config.seeds.len();
    if failures.len() * 10 > total {
        return Err(SimError::TooManyFailures {
            failed: failures.len(),
            total,
            first: failures[0].error.clone(),
        });
    }
    Ok(ExperimentOutcome {
        config: config.clone(),
        params,
        traces,
        failures,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
