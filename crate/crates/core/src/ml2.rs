//! The multi-level learning loop.
//!
//! Each round the agent sees a decision set, scores every action by
//! `min_l max_{f ∈ C_{t,l}} f(a)` and plays the best one. After acting it
//! observes the reward together with the variance bound `σ_t²`, routes the
//! round to its level and asks the subroutine to refresh that level's set.
//! All other levels keep their sets untouched.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::levels::{num_levels, LevelPartition};
use crate::noise::{sample_noise, NoiseSpec};
use crate::trace::RunTrace;

/// A bandit instance with oracle access to its mean rewards.
pub trait Environment {
    type Action;
    type Truth;

    fn horizon(&self) -> usize;
    /// Decision set `𝒟_t` for 1-based round `t`.
    fn decision_set(&self, t: usize) -> &[Self::Action];
    fn mean_reward(&self, action: &Self::Action) -> f64;
    fn noise(&self) -> &NoiseSpec;
    fn truth(&self) -> &Self::Truth;
}

/// Regression subroutine maintaining one confidence set per level.
///
/// Round indices are 1-based. `optimistic_value(l, t, a)` and
/// `covers(l, t, truth)` refer to the set the agent uses to act at round `t`,
/// so the threshold may grow with `t` even for levels that received no new
/// data.
pub trait ConfidenceSubroutine {
    type Action;
    type Truth;
    type LevelState: PartialEq;

    fn num_levels(&self) -> usize;

    /// `max_{f ∈ C_{t,l}} f(a)`, or `None` when the set is empty.
    fn optimistic_value(&self, level: usize, t: usize, action: &Self::Action) -> Option<f64>;

    /// Adds round `t`'s datum to `level` and refreshes that level's set.
    fn update(&mut self, level: usize, t: usize, action: &Self::Action, reward: f64) -> Result<()>;

    /// Whether the truth lies in the set the agent would use at round `t`.
    fn covers(&self, level: usize, t: usize, truth: &Self::Truth) -> bool;

    fn level_state(&self, level: usize) -> &Self::LevelState;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ml2Config {
    pub horizon: usize,
    /// Sub-Gaussian parameter `R`.
    pub noise_bound: f64,
    pub sigma_bar: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Keep per-action OFU scores in the trace.
    #[serde(default)]
    pub record_scores: bool,
    /// Evaluate coverage flags against the truth (harness-only path).
    #[serde(default = "default_true")]
    pub track_coverage: bool,
}

fn default_true() -> bool {
    true
}

impl Ml2Config {
    pub fn new(horizon: usize, noise_bound: f64, sigma_bar: f64, delta: f64, alpha: f64) -> Self {
        Self {
            horizon,
            noise_bound,
            sigma_bar,
            delta,
            alpha,
            record_scores: false,
            track_coverage: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        num_levels(self.noise_bound, self.sigma_bar).map(|_| ())
    }

    pub fn num_levels(&self) -> Result<usize> {
        num_levels(self.noise_bound, self.sigma_bar)
    }
}

/// Index of `argmax_a min_l score(a, l)` together with every action's score.
///
/// Levels scoring `None` (empty sets) are skipped in the minimum. Ties go to
/// the lowest index.
pub fn select_action_ofu<F>(num_actions: usize, num_levels: usize, mut score: F) -> Result<(usize, Vec<f64>)>
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    if num_actions == 0 {
        return Err(invalid("decision set is empty"));
    }
    if num_levels == 0 {
        return Err(invalid("at least one level is required"));
    }
    let mut scores = Vec::with_capacity(num_actions);
    for a in 0..num_actions {
        let value = (0..num_levels)
            .filter_map(|l| score(a, l))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |m| m.min(v))));
        match value {
            Some(v) => scores.push(v),
            None => {
                return Err(Error::Config(
                    "every level's confidence set is empty; no action can be scored".into(),
                ))
            }
        }
    }
    let mut best = 0;
    for (a, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = a;
        }
    }
    Ok((best, scores))
}

/// Runs one episode of ML² with OFU for `config.horizon` rounds.
pub fn run_episode<E, S, R>(
    env: &E,
    config: &Ml2Config,
    subroutine: &mut S,
    rng: &mut R,
    seed: Option<u64>,
) -> Result<RunTrace>
where
    E: Environment,
    S: ConfidenceSubroutine<Action = E::Action, Truth = E::Truth>,
    R: Rng + ?Sized,
{
    config.validate()?;
    let levels = config.num_levels()?;
    if subroutine.num_levels() != levels {
        return Err(Error::Config(format!(
            "subroutine has {} levels but the configuration implies {levels}",
            subroutine.num_levels()
        )));
    }
    if env.horizon() < config.horizon || env.noise().len() < config.horizon {
        return Err(Error::Config(format!(
            "environment horizon {} (noise schedule {}) is shorter than T = {}",
            env.horizon(),
            env.noise().len(),
            config.horizon
        )));
    }

    let mut partition = LevelPartition::new(config.sigma_bar, levels)?;
    let mut trace = RunTrace::new(seed);
    let mut values = Vec::new();
    for t in 1..=config.horizon {
        let decision_set = env.decision_set(t);
        let covered_before = config
            .track_coverage
            .then(|| (0..levels).all(|l| subroutine.covers(l, t, env.truth())));

        let mut saw_empty = false;
        let (chosen, scores) = select_action_ofu(decision_set.len(), levels, |a, l| {
            let v = subroutine.optimistic_value(l, t, &decision_set[a]);
            saw_empty |= v.is_none();
            v
        })
        .map_err(|e| at_round(t, e))?;

        let action = &decision_set[chosen];
        let reward = env.mean_reward(action) + sample_noise(env.noise(), t, rng)?;
        let sigma = env.noise().sigma(t)?;
        let level = partition.assign(t, sigma)?;
        subroutine
            .update(level, t, action, reward)
            .map_err(|e| at_round(t, e))?;

        values.clear();
        values.extend(decision_set.iter().map(|a| env.mean_reward(a)));
        let record = trace.record_round(&values, chosen, reward, sigma, level)?;
        record.covered_before = covered_before;
        if config.record_scores {
            record.scores = scores;
        }
        if saw_empty {
            trace.empty_set_rounds += 1;
        }
        if config.track_coverage {
            let ok = subroutine.covers(level, t + 1, env.truth());
            trace.set_coverage(ok);
        }
    }
    trace.level_sizes = partition.sizes();
    Ok(trace)
}

fn at_round(round: usize, source: Error) -> Error {
    Error::Round {
        round,
        source: Box::new(source),
    }
}
