//! Stand-alone FTRL runs on a synthetic regression stream, used to probe the
//! learner's regret bound and its convexity inequality.

use hetbandit_core::glm::{ftrl_regret_bound, convexity_inequality_check, online_regression_regret, FtrlLearner, GlmModel, Link, OnlineStep};
use hetbandit_core::{sample_noise, NoiseKind, NoiseSpec};
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{environment_rng, noise_rng, random_sphere_point};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRegressionSpec {
    pub link: Link,
    pub dim: usize,
    pub action_bound: f64,
    pub param_bound: f64,
    /// Sub-Gaussian parameter `R`.
    pub noise_bound: f64,
    /// `σ_t` is drawn uniformly from `[0, sigma_max]`.
    pub sigma_max: f64,
    pub horizon: usize,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub model: GlmModel,
    pub truth: DVector<f64>,
    pub steps: Vec<OnlineStep>,
}

impl OnlineRun {
    pub fn regret(&self) -> f64 {
        online_regression_regret(&self.steps, &self.truth, &self.model)
    }
}

impl OnlineRegressionSpec {
    pub fn model(&self) -> Result<GlmModel> {
        Ok(GlmModel::new(self.link, self.dim, self.action_bound, self.param_bound)?)
    }

    pub fn regret_bound(&self) -> Result<f64> {
        Ok(ftrl_regret_bound(self.horizon, &self.model()?, self.noise_bound, self.sigma_max, self.delta)?)
    }

    /// Feeds `horizon` rounds to a fresh FTRL learner. `θ*` is uniform in the
    /// radius-`param_bound` ball and actions uniform on the radius-`action_bound`
    /// sphere.
    pub fn run(&self, seed: u64) -> Result<OnlineRun> {
        let model = self.model()?;
        let mut env = environment_rng(seed);
        let radius = self.param_bound * env.random::<f64>().powf(1.0 / self.dim as f64);
        let truth = random_sphere_point(&mut env, self.dim) * radius;
        let sigmas: Vec<f64> = (0..self.horizon).map(|_| env.random_range(0.0..=self.sigma_max)).collect();
        let noise = NoiseSpec::new(self.noise_bound, sigmas, NoiseKind::Gaussian)?;
        let mut rng = noise_rng(seed);

        let mut learner = FtrlLearner::new(model.clone());
        let mut steps = Vec::with_capacity(self.horizon);
        for t in 1..=self.horizon {
            let action = random_sphere_point(&mut env, self.dim) * self.action_bound;
            let reward = model.mean(action.dot(&truth)) + sample_noise(&noise, t, &mut rng)?;
            steps.push(OnlineStep {
                action: action.clone(),
                reward,
                iterate: learner.predict().clone(),
            });
            learner.observe(action, reward)?;
        }
        Ok(OnlineRun { model, truth, steps })
    }

    /// Whether the convexity inequality holds at every prefix of `run`.
    pub fn inequality_holds(&self, run: &OnlineRun) -> Result<bool> {
        Ok(convexity_inequality_check(&run.steps, &run.truth, &run.model, self.noise_bound, self.delta)?)
    }
}
